//! Monte-Carlo RIP estimation and residual oracles for the RIP lemmas.
//!
//! Certifying the restricted isometry constant is intractable in general, so
//! [`estimate_rip`] reports the worst deviation seen over random low-rank
//! probes. The result is a lower bound on the true constant and always
//! carries its sample count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, dot, Matrix, DEFAULT_RANK_TOL};
use crate::rng::{self, Stream};
use crate::sensing::{apply_map, MeasurementEnsemble};

/// Headroom applied to δ̂ when checking lemma bounds.
pub const LEMMA_SLACK: f64 = 0.5;

/// Probe family used by [`estimate_rip_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    /// `X = G·diag(s)·Gᵀ` with Gaussian `G` (d×r) and `s`.
    #[default]
    Symmetric,
    /// `X = G Hᵀ`. Symmetrized sensors only see `sym(X)`, so this family
    /// also measures the loss of the antisymmetric part.
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: u64,
    pub index: usize,
    /// `(1/m) Σ ⟨A_i, X⟩²` for the maximizing probe (with `‖X‖_F = 1`).
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub r: usize,
    pub d: usize,
    pub m: usize,
    pub probe_kind: ProbeKind,
    /// Largest `|(1/m) Σ ⟨A_i,X⟩² − 1|` over the probes; a lower bound on δ.
    pub delta_hat: f64,
    pub samples: usize,
    pub worst_witness: Witness,
    /// Largest over-isometry deviation `max(ratio − 1)`.
    pub over: f64,
    /// Largest under-isometry deviation `max(1 − ratio)`.
    pub under: f64,
    /// `max(over, under)`; equal to `delta_hat`.
    pub two_sided: f64,
    /// Refinement iterations spent per extreme probe.
    #[serde(default)]
    pub refine_steps: usize,
}

fn probe_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The `index`-th probe of a probe family, Frobenius-normalized.
pub fn probe_matrix(d: usize, r: usize, kind: ProbeKind, seed: u64, index: usize) -> Matrix {
    let mut rng = rng::stream(probe_seed(seed, index), Stream::Probes);
    let g = rng::gaussian_matrix(&mut rng, d, r);
    let x = match kind {
        ProbeKind::Symmetric => {
            let s: Vec<f64> = (0..r).map(|_| rng::gaussian(&mut rng)).collect();
            g.matmul(&Matrix::from_diag(&s)).matmul(&g.transpose()).symmetrized()
        }
        ProbeKind::Asymmetric => {
            let h = rng::gaussian_matrix(&mut rng, d, r);
            g.matmul(&h.transpose())
        }
    };
    let norm = x.frobenius_norm();
    x.scale(1.0 / norm)
}

/// `(1/m) Σ ⟨A_i, X⟩² / ‖X‖_F²`.
pub fn isometry_ratio(ens: &MeasurementEnsemble, x: &Matrix) -> Result<f64> {
    let meas = ens.measure(x)?;
    let energy = dot(&meas, &meas) / ens.m() as f64;
    Ok(energy / x.frobenius_norm_sq())
}

#[derive(Debug, Clone, Copy)]
pub struct RipOptions {
    pub rank: usize,
    pub n_probes: usize,
    pub seed: u64,
    pub kind: ProbeKind,
    /// Truncated power iterations applied to the most extreme probes; 0
    /// keeps the plain random search.
    pub refine_steps: usize,
}

pub fn estimate_rip(ens: &MeasurementEnsemble, r: usize, n_probes: usize, seed: u64) -> Result<RipReport> {
    estimate_rip_with(
        ens,
        &RipOptions {
            rank: r,
            n_probes,
            seed,
            kind: ProbeKind::Symmetric,
            refine_steps: 0,
        },
    )
}

pub fn estimate_rip_with(ens: &MeasurementEnsemble, opts: &RipOptions) -> Result<RipReport> {
    if opts.n_probes == 0 {
        return Err(Error::InvalidArgument("n_probes must be at least 1".into()));
    }
    if opts.rank == 0 || opts.rank > ens.d() {
        return Err(Error::InvalidArgument(format!(
            "probe rank {} must lie in 1..={}",
            opts.rank,
            ens.d()
        )));
    }
    let ratios = (0..opts.n_probes)
        .map(|j| isometry_ratio(ens, &probe_matrix(ens.d(), opts.rank, opts.kind, opts.seed, j)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = summarize(ens, opts, &ratios);
    if opts.refine_steps > 0 {
        refine_report(ens, opts, &ratios, &mut report)?;
    }
    Ok(report)
}

/// Best rank-`r` symmetric approximation of `sym(x)`, Frobenius-normalized.
fn rank_r_unit(x: &Matrix, r: usize) -> Result<Option<Matrix>> {
    let eig = matkit::sym_eigen(&x.symmetrized())?;
    let mut order: Vec<usize> = (0..eig.values.len()).collect();
    order.sort_by(|&a, &b| eig.values[b].abs().total_cmp(&eig.values[a].abs()));
    let mut kept = vec![0.0; eig.values.len()];
    for &k in order.iter().take(r) {
        kept[k] = eig.values[k];
    }
    let y = matkit::sym_from_eigen(&kept, &eig.vectors);
    let norm = y.frobenius_norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Ok(None);
    }
    Ok(Some(y.scale(1.0 / norm)))
}

/// Truncated power iteration on `X ↦ shift·X + sign·M(X)` restricted to rank
/// `r`. Returns the most extreme ratio visited (largest when `sign > 0`).
fn refine_probe(ens: &MeasurementEnsemble, start: &Matrix, r: usize, steps: usize, shift: f64, sign: f64) -> Result<f64> {
    let mut x = start.clone();
    let mut best = isometry_ratio(ens, &x)?;
    for _ in 0..steps {
        let mut next = apply_map(ens, &x)?.scale(sign);
        if shift != 0.0 {
            next.axpy(shift, &x);
        }
        x = match rank_r_unit(&next, r)? {
            Some(y) => y,
            None => break,
        };
        let ratio = isometry_ratio(ens, &x)?;
        best = if sign > 0.0 { best.max(ratio) } else { best.min(ratio) };
    }
    Ok(best)
}

fn refine_report(ens: &MeasurementEnsemble, opts: &RipOptions, ratios: &[f64], report: &mut RipReport) -> Result<()> {
    let argmax = (0..ratios.len()).max_by(|&a, &b| ratios[a].total_cmp(&ratios[b])).unwrap_or(0);
    let argmin = (0..ratios.len()).min_by(|&a, &b| ratios[a].total_cmp(&ratios[b])).unwrap_or(0);
    let seed_for = |j| probe_matrix(ens.d(), opts.rank, opts.kind, opts.seed, j);
    let high = refine_probe(ens, &seed_for(argmax), opts.rank, opts.refine_steps, 0.0, 1.0)?;
    let low = refine_probe(ens, &seed_for(argmin), opts.rank, opts.refine_steps, high, -1.0)?;
    let over = report.over.max(high - 1.0);
    let under = report.under.max(1.0 - low);
    if over.max(under) > report.delta_hat {
        let (index, ratio) = if over >= under { (argmax, high) } else { (argmin, low) };
        report.worst_witness = Witness {
            seed: probe_seed(opts.seed, index),
            index,
            ratio,
        };
    }
    report.over = over;
    report.under = under;
    report.delta_hat = over.max(under);
    report.two_sided = report.delta_hat;
    report.refine_steps = opts.refine_steps;
    Ok(())
}

/// Report over precomputed probe matrices (each must have `‖X‖_F > 0`).
pub fn estimate_rip_on(ens: &MeasurementEnsemble, probes: &[Matrix], rank: usize) -> Result<RipReport> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probes".into()));
    }
    let ratios = probes
        .iter()
        .map(|x| isometry_ratio(ens, x))
        .collect::<Result<Vec<_>>>()?;
    let opts = RipOptions {
        rank,
        n_probes: probes.len(),
        seed: 0,
        kind: ProbeKind::Symmetric,
        refine_steps: 0,
    };
    Ok(summarize(ens, &opts, &ratios))
}

fn summarize(ens: &MeasurementEnsemble, opts: &RipOptions, ratios: &[f64]) -> RipReport {
    let mut over = f64::NEG_INFINITY;
    let mut under = f64::NEG_INFINITY;
    let mut worst = (0usize, f64::NEG_INFINITY);
    for (j, &ratio) in ratios.iter().enumerate() {
        over = over.max(ratio - 1.0);
        under = under.max(1.0 - ratio);
        let dev = (ratio - 1.0).abs();
        if dev > worst.1 {
            worst = (j, dev);
        }
    }
    let delta_hat = worst.1.max(0.0);
    RipReport {
        r: opts.rank,
        d: ens.d(),
        m: ens.m(),
        probe_kind: opts.kind,
        delta_hat,
        samples: ratios.len(),
        worst_witness: Witness {
            seed: probe_seed(opts.seed, worst.0),
            index: worst.0,
            ratio: ratios[worst.0],
        },
        over: over.max(0.0),
        under: under.max(0.0),
        two_sided: delta_hat,
        refine_steps: 0,
    }
}

/// A lemma residual plus whether the rank hypotheses held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaResidual {
    pub value: f64,
    /// False when an input exceeded the tested rank; the bound may not apply.
    pub rank_ok: bool,
}

fn rank_at_most(x: &Matrix, r: usize) -> Result<bool> {
    Ok(matkit::svd(x)?.rank(DEFAULT_RANK_TOL) <= r)
}

fn ip_deviation(ens: &MeasurementEnsemble, x: &Matrix, y: &Matrix) -> Result<f64> {
    let mx = ens.measure(x)?;
    let my = ens.measure(y)?;
    let empirical = dot(&mx, &my) / ens.m() as f64;
    Ok((empirical - x.inner(y)).abs())
}

/// `|(1/m) Σ ⟨A_i,X⟩⟨A_i,Y⟩ − ⟨X,Y⟩|` for `X`, `Y` of rank at most `r`;
/// compare against `δ ‖X‖_F ‖Y‖_F`.
pub fn lemma_ip_residual(ens: &MeasurementEnsemble, x: &Matrix, y: &Matrix, r: usize) -> Result<LemmaResidual> {
    let value = ip_deviation(ens, x, y)?;
    let rank_ok = rank_at_most(x, r)? && rank_at_most(y, r)?;
    Ok(LemmaResidual { value, rank_ok })
}

/// `‖M(X) R − X R‖₂` for `X` of rank at most `r`; compare against
/// `δ ‖X‖_F ‖R‖₂`.
pub fn lemma_opnorm_residual(ens: &MeasurementEnsemble, x: &Matrix, rmat: &Matrix, r: usize) -> Result<LemmaResidual> {
    let value = op_deviation(ens, x, rmat, None)?;
    Ok(LemmaResidual {
        value,
        rank_ok: rank_at_most(x, r)?,
    })
}

/// Same quantity as [`lemma_ip_residual`] with `X` of any rank; compare
/// against `δ ‖X‖_* ‖Y‖_F`.
pub fn lemma_nuclear_ip_residual(
    ens: &MeasurementEnsemble,
    x: &Matrix,
    y: &Matrix,
    r: usize,
) -> Result<LemmaResidual> {
    let value = ip_deviation(ens, x, y)?;
    Ok(LemmaResidual {
        value,
        rank_ok: rank_at_most(y, r)?,
    })
}

/// `‖U M(X) R − U X R‖₂` (with `U = I` when absent) for `X` of any rank;
/// compare against `δ(1) ‖X‖_* ‖U‖₂ ‖R‖₂`.
pub fn lemma_nuclear_op_residual(
    ens: &MeasurementEnsemble,
    x: &Matrix,
    rmat: &Matrix,
    left: Option<&Matrix>,
) -> Result<f64> {
    op_deviation(ens, x, rmat, left)
}

fn op_deviation(ens: &MeasurementEnsemble, x: &Matrix, rmat: &Matrix, left: Option<&Matrix>) -> Result<f64> {
    if rmat.rows() != ens.d() {
        return Err(Error::dims(format!("{} rows", ens.d()), format!("{} rows", rmat.rows())));
    }
    let diff = &apply_map(ens, x)? - x;
    let mut out = diff.matmul(rmat);
    if let Some(u) = left {
        if u.cols() != ens.d() {
            return Err(Error::dims(format!("{} cols", ens.d()), format!("{} cols", u.cols())));
        }
        out = u.matmul(&out);
    }
    matkit::spectral_norm(&out)
}

/// Default truncation radius for the rank-1 concentration check:
/// `log(1/δ)²` for a target accuracy `δ`.
pub fn default_rcut(delta_target: f64) -> f64 {
    (1.0 / delta_target).ln().powi(2)
}

/// `‖(1/m) Σ ⟨A_i,X⟩ A_i 1{|⟨A_i,X⟩| ≤ R} − 2X − trace(X) I‖₂` with
/// `A_i = x_i x_iᵀ` for the rows `x_i` of `samples`; compare against
/// `δ ‖X‖_*`. `rcut` may be `+∞`.
pub fn truncated_rank1_deviation(samples: &Matrix, x: &Matrix, rcut: f64) -> Result<f64> {
    if !(rcut > 0.0) {
        return Err(Error::InvalidArgument(format!("Rcut must be positive, got {rcut}")));
    }
    let (m, d) = samples.shape();
    if x.shape() != (d, d) {
        return Err(Error::dims(format!("{d}x{d}"), format!("{}x{}", x.rows(), x.cols())));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let asym = x.asymmetry();
    if asym > matkit::SYMMETRY_TOL * x.max_abs().max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    let inv_m = 1.0 / m as f64;
    let mut acc = vec![0.0; d * (d + 1) / 2];
    for i in 0..m {
        let xi = samples.row(i);
        let xv = x.mul_vec(xi);
        let ip = dot(xi, &xv);
        if ip.abs() > rcut {
            continue;
        }
        let s = ip * inv_m;
        let mut idx = 0;
        for j in 0..d {
            let sj = s * xi[j];
            for k in j..d {
                acc[idx] += sj * xi[k];
                idx += 1;
            }
        }
    }
    let mut dev = crate::sensing::unpack_symmetric(&acc, d);
    dev.axpy(-2.0, x);
    let tr = x.trace();
    for j in 0..d {
        dev[(j, j)] -= tr;
    }
    matkit::spectral_norm(&dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_matrix;
    use crate::sensing::{sample_gaussian_ensemble, sample_ground_truth, TruthMode};

    fn ensemble(d: usize, m: usize, seed: u64) -> MeasurementEnsemble {
        let gt = sample_ground_truth(d, 1, 1.0, TruthMode::Spec, seed).unwrap();
        sample_gaussian_ensemble(&gt, m, seed + 1).unwrap()
    }

    fn rand_matrix(seed: u64, r: usize, c: usize) -> Matrix {
        gaussian_matrix(&mut rng::stream(seed, Stream::Probes), r, c)
    }

    #[test]
    fn orthogonal_single_sensor_fails_completely() {
        // A = e1 e2ᵀ + e2 e1ᵀ is orthogonal to X = e1 e1ᵀ.
        let mut a = Matrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let ens = MeasurementEnsemble::from_sensors(&[a], vec![0.0]).unwrap();
        let mut x = Matrix::zeros(3, 3);
        x[(0, 0)] = 1.0;
        let rep = estimate_rip_on(&ens, &[x], 1).unwrap();
        assert_eq!(rep.delta_hat, 1.0);
        assert_eq!(rep.under, 1.0);
    }

    #[test]
    fn duplicated_sensors_leave_estimate_unchanged() {
        let ens = ensemble(6, 15, 3);
        let doubled_idx: Vec<usize> = (0..15).flat_map(|i| [i, i]).collect();
        let doubled = ens.select(&doubled_idx);
        let a = estimate_rip(&ens, 2, 40, 9).unwrap();
        let b = estimate_rip(&doubled, 2, 40, 9).unwrap();
        assert!((a.delta_hat - b.delta_hat).abs() < 1e-12);
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let ens = ensemble(8, 100, 1);
        let a = estimate_rip(&ens, 2, 30, 4).unwrap();
        let b = estimate_rip(&ens, 2, 30, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, 30);
        assert!(a.delta_hat >= 0.0);
        assert_eq!(a.delta_hat, a.over.max(a.under));
        let w = probe_matrix(8, 2, ProbeKind::Symmetric, 4, a.worst_witness.index);
        assert_eq!(isometry_ratio(&ens, &w).unwrap(), a.worst_witness.ratio);
        assert!(estimate_rip(&ens, 2, 0, 4).is_err());
    }

    fn refined(ens: &MeasurementEnsemble, rank: usize, steps: usize) -> RipReport {
        let opts = RipOptions {
            rank,
            n_probes: 30,
            seed: 4,
            kind: ProbeKind::Symmetric,
            refine_steps: steps,
        };
        estimate_rip_with(ens, &opts).unwrap()
    }

    #[test]
    fn refinement_only_raises_the_estimate() {
        let ens = ensemble(8, 40, 5);
        let plain = refined(&ens, 2, 0);
        let sharp = refined(&ens, 2, 20);
        assert_eq!(plain, estimate_rip(&ens, 2, 30, 4).unwrap());
        assert!(sharp.delta_hat >= plain.delta_hat);
        assert!(sharp.over >= plain.over && sharp.under >= plain.under);
        assert_eq!(sharp.delta_hat, sharp.over.max(sharp.under));
        assert_eq!(sharp.refine_steps, 20);
    }

    #[test]
    fn full_rank_refinement_stays_below_exact_constant() {
        // With r = d the constant is the extreme eigenvalue deviation of
        // X ↦ (1/m) Σ ⟨A_i,X⟩ A_i on symmetric matrices.
        let d = 3;
        let ens = ensemble(d, 12, 8);
        let mut basis = Vec::new();
        for i in 0..d {
            for j in i..d {
                let mut b = Matrix::zeros(d, d);
                let w = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                b[(i, j)] = w;
                b[(j, i)] = w;
                basis.push(b);
            }
        }
        let n = basis.len();
        let meas: Vec<Vec<f64>> = basis.iter().map(|b| ens.measure(b).unwrap()).collect();
        let mut gram = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] = dot(&meas[a], &meas[b]) / ens.m() as f64;
            }
        }
        let eig = matkit::sym_eigen(&gram).unwrap();
        let exact = eig.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        let plain = refined(&ens, d, 0);
        let sharp = refined(&ens, d, 200);
        assert!(sharp.delta_hat <= exact + 1e-9);
        assert!(sharp.delta_hat >= plain.delta_hat);
        assert!(exact - sharp.delta_hat < 1e-6, "exact {exact} refined {}", sharp.delta_hat);
    }

    #[test]
    fn probes_have_requested_rank() {
        for kind in [ProbeKind::Symmetric, ProbeKind::Asymmetric] {
            let x = probe_matrix(7, 3, kind, 1, 2);
            assert!((x.frobenius_norm() - 1.0).abs() < 1e-12);
            assert_eq!(matkit::svd(&x).unwrap().rank(1e-10), 3);
        }
        assert_eq!(probe_matrix(7, 3, ProbeKind::Symmetric, 1, 2).asymmetry(), 0.0);
    }

    #[test]
    fn nested_probe_sets_are_monotone_in_rank() {
        let ens = ensemble(10, 60, 2);
        let low: Vec<Matrix> = (0..20).map(|j| probe_matrix(10, 2, ProbeKind::Symmetric, 5, j)).collect();
        // A rank-2 probe is a rank-3 probe with a zero third direction.
        let mut high = low.clone();
        high.extend((0..20).map(|j| probe_matrix(10, 3, ProbeKind::Symmetric, 6, j)));
        let a = estimate_rip_on(&ens, &low, 2).unwrap();
        let b = estimate_rip_on(&ens, &high, 3).unwrap();
        assert!(b.delta_hat >= a.delta_hat);
    }

    #[test]
    fn lemma_residual_edge_cases() {
        let ens = ensemble(6, 40, 1);
        let x = probe_matrix(6, 2, ProbeKind::Symmetric, 1, 0);
        let zero = Matrix::zeros(6, 6);
        assert_eq!(lemma_ip_residual(&ens, &x, &zero, 2).unwrap().value, 0.0);
        let same = lemma_ip_residual(&ens, &x, &x, 2).unwrap().value;
        assert!((same - (isometry_ratio(&ens, &x).unwrap() - 1.0).abs()).abs() < 1e-12);

        assert_eq!(lemma_opnorm_residual(&ens, &x, &Matrix::zeros(6, 3), 2).unwrap().value, 0.0);
        let ident = lemma_opnorm_residual(&ens, &x, &Matrix::identity(6), 2).unwrap().value;
        let direct = matkit::spectral_norm(&(&apply_map(&ens, &x).unwrap() - &x)).unwrap();
        assert!((ident - direct).abs() < 1e-12);

        assert_eq!(lemma_nuclear_ip_residual(&ens, &zero, &x, 2).unwrap().value, 0.0);
        let v = rand_matrix(3, 6, 1);
        let rank1 = v.gram_outer();
        let y = probe_matrix(6, 1, ProbeKind::Symmetric, 2, 0);
        let a = lemma_nuclear_ip_residual(&ens, &rank1, &y, 1).unwrap().value;
        let b = lemma_ip_residual(&ens, &rank1, &y, 1).unwrap().value;
        assert_eq!(a, b);

        let rmat = rand_matrix(4, 6, 4);
        assert_eq!(lemma_nuclear_op_residual(&ens, &zero, &rmat, None).unwrap(), 0.0);
        let full = rand_matrix(5, 6, 6).symmetrized();
        let plain = lemma_nuclear_op_residual(&ens, &full, &rmat, None).unwrap();
        let with_i = lemma_nuclear_op_residual(&ens, &full, &rmat, Some(&Matrix::identity(6))).unwrap();
        assert!((plain - with_i).abs() < 1e-12);
    }

    #[test]
    fn rank_violation_is_flagged() {
        let ens = ensemble(6, 40, 1);
        let x = probe_matrix(6, 3, ProbeKind::Symmetric, 1, 0);
        let y = probe_matrix(6, 1, ProbeKind::Symmetric, 1, 1);
        assert!(!lemma_ip_residual(&ens, &x, &y, 2).unwrap().rank_ok);
        assert!(lemma_ip_residual(&ens, &x, &y, 3).unwrap().rank_ok);
    }

    #[test]
    fn ip_residual_is_symmetric() {
        let ens = ensemble(7, 50, 1);
        for j in 0..10 {
            let x = probe_matrix(7, 2, ProbeKind::Symmetric, 11, j);
            let y = probe_matrix(7, 2, ProbeKind::Symmetric, 12, j);
            assert_eq!(
                lemma_ip_residual(&ens, &x, &y, 2).unwrap().value,
                lemma_ip_residual(&ens, &y, &x, 2).unwrap().value
            );
        }
    }

    #[test]
    fn truncated_deviation_edge_cases() {
        let samples = rand_matrix(1, 50, 4);
        let zero = Matrix::zeros(4, 4);
        assert_eq!(truncated_rank1_deviation(&samples, &zero, 1.0).unwrap(), 0.0);

        let v = rand_matrix(2, 4, 1);
        let x = v.gram_outer();
        let mut expected = x.scale(2.0);
        for j in 0..4 {
            expected[(j, j)] += x.trace();
        }
        let all_cut = truncated_rank1_deviation(&samples, &x, 1e-300).unwrap();
        assert!((all_cut - matkit::spectral_norm(&expected).unwrap()).abs() < 1e-12);
        assert!(truncated_rank1_deviation(&samples, &x, 0.0).is_err());
    }

    #[test]
    fn truncated_deviation_on_scaled_identity() {
        let d = 25;
        let samples = rand_matrix(3, 50_000, d);
        let x = Matrix::identity(d).scale(1.0 / d as f64);
        let dev = truncated_rank1_deviation(&samples, &x, f64::INFINITY).unwrap();
        assert!(dev.is_finite() && dev <= 0.5, "deviation {dev}");
    }
}
