//! One-hidden-layer networks with quadratic activations, `ŷ = ‖Uᵀx‖²`,
//! trained on the truncated empirical risk
//! `f̃(U) = (1/n) Σ (ŷ_i − y_i)² 1{‖Uᵀx_i‖² ≤ R}`.
//!
//! Each example is the rank-1 sensor `x xᵀ`, so `ŷ = ⟨x xᵀ, U Uᵀ⟩` and the
//! trainers reuse the solver trajectory machinery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{dot, Matrix};
use crate::probes::ProbeHook;
use crate::rng::{self, Stream};
use crate::sensing::{pack_upper, packed_len, relative_train_error, unpack_symmetric, GroundTruth, MeasurementEnsemble};
use crate::solvers::{self, InitBasis, RunConfig, SolverConfig, StepFailure, StepOutcome, StepResult, Trajectory};

/// Rescaling denominators with magnitude at or below this abort the run.
pub const RESCALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadDataset {
    pub d: usize,
    /// `n × d`, row-major.
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
    pub rank_hint: usize,
    pub seed: u64,
}

impl QuadDataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn inputs_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n(), self.d, self.inputs.clone())
    }

    /// `mean(y)`, an unbiased estimate of `‖U*‖_F²`.
    pub fn tau_estimate(&self) -> f64 {
        self.labels.iter().sum::<f64>() / self.n() as f64
    }

    /// The rank-1 sensing ensemble `{x_i x_iᵀ}` with the same labels.
    pub fn to_ensemble(&self) -> Result<MeasurementEnsemble> {
        let mut packed = Vec::with_capacity(self.n() * packed_len(self.d));
        for i in 0..self.n() {
            let x = self.input(i);
            packed.extend(pack_upper(&Matrix::outer(x, x)));
        }
        let mut ens = MeasurementEnsemble::from_packed(self.d, packed, self.labels.clone())?;
        ens.rank_hint = self.rank_hint;
        ens.seed = self.seed;
        Ok(ens)
    }

    fn check_factor(&self, u: &Matrix) -> Result<()> {
        if u.rows() != self.d {
            return Err(Error::dims(format!("{} rows", self.d), format!("{} rows", u.rows())));
        }
        Ok(())
    }
}

/// `n` standard Gaussian inputs labelled by `y = ‖Fᵀx‖² = xᵀX*x`, where
/// `F` is the ground-truth factor.
pub fn gen_quad_data(gt: &GroundTruth, n: usize, seed: u64) -> Result<QuadDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let d = gt.d;
    let mut rng = rng::stream(seed, Stream::QuadData);
    let inputs: Vec<f64> = (0..n * d).map(|_| rng::gaussian(&mut rng)).collect();
    let labels = (0..n)
        .map(|i| predict(&gt.factor, &inputs[i * d..(i + 1) * d]))
        .collect();
    Ok(QuadDataset {
        d,
        inputs,
        labels,
        rank_hint: gt.r,
        seed,
    })
}

/// `ŷ = 1ᵀ q(Uᵀx) = ‖Uᵀx‖²`.
pub fn predict(u: &Matrix, x: &[f64]) -> f64 {
    let v = u.tr_mul_vec(x);
    dot(&v, &v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    /// `τ = ‖U*‖_F²` from the ground truth.
    #[default]
    Exact,
    /// `τ = mean(y)`.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rescale {
    /// `U' = Ũ / (1 − η(‖U‖_F² − τ))` as written.
    #[default]
    Verbatim,
    /// Denominator `1 − 4η(‖U‖_F² − τ)`, matching the factor 4 of `∇f̃`.
    Matched,
    /// Plain gradient step.
    Off,
}

fn default_record_every() -> usize {
    100
}

fn default_truncate() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub alpha: f64,
    pub eta: f64,
    #[serde(alias = "T")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init_basis: InitBasis,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Truncation radius `R`; `None` means `20 log d`.
    #[serde(default)]
    pub rcut: Option<f64>,
    /// `false` disables truncation (`R = ∞`).
    #[serde(default = "default_truncate")]
    pub truncate: bool,
    #[serde(default)]
    pub tau_mode: TauMode,
    #[serde(default)]
    pub rescale: Rescale,
    /// Examples per SGD step.
    #[serde(default)]
    pub batch: Option<usize>,
}

impl QuadConfig {
    pub fn new(alpha: f64, eta: f64, iterations: usize) -> Self {
        QuadConfig {
            alpha,
            eta,
            iterations,
            seed: 0,
            init_basis: InitBasis::Identity,
            record_every: default_record_every(),
            rcut: None,
            truncate: true,
            tau_mode: TauMode::Exact,
            rescale: Rescale::Verbatim,
            batch: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver_view().validate()?;
        if let Some(r) = self.rcut {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("Rcut must be positive, got {r}")));
            }
        }
        if self.batch == Some(0) {
            return Err(Error::InvalidArgument("batch must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective truncation radius for dimension `d`.
    pub fn effective_rcut(&self, d: usize) -> f64 {
        if !self.truncate {
            return f64::INFINITY;
        }
        self.rcut.unwrap_or_else(|| default_rcut(d))
    }

    fn solver_view(&self) -> SolverConfig {
        SolverConfig {
            seed: self.seed,
            init_basis: self.init_basis,
            record_every: self.record_every,
            ..SolverConfig::new(self.alpha, self.eta, self.iterations)
        }
    }
}

/// `20 log d` (at least `20 log 2` so that `d = 1` stays positive).
pub fn default_rcut(d: usize) -> f64 {
    20.0 * (d.max(2) as f64).ln()
}

pub fn tau(data: &QuadDataset, gt: &GroundTruth, mode: TauMode) -> f64 {
    match mode {
        TauMode::Exact => gt.tau(),
        TauMode::Estimated => data.tau_estimate(),
    }
}

fn check_rcut(rcut: f64) -> Result<()> {
    if rcut > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Rcut must be positive, got {rcut}")))
    }
}

/// `f̃(U) = (1/n) Σ (ŷ_i − y_i)² 1{ŷ_i ≤ R}`.
pub fn truncated_loss(u: &Matrix, data: &QuadDataset, rcut: f64) -> Result<f64> {
    check_rcut(rcut)?;
    data.check_factor(u)?;
    let mut acc = 0.0;
    for i in 0..data.n() {
        let yhat = predict(u, data.input(i));
        if yhat <= rcut {
            let r = yhat - data.labels[i];
            acc += r * r;
        }
    }
    Ok(acc / data.n() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGradient {
    /// `∇f̃(U) = 4 M U`.
    pub gradient: Matrix,
    /// `M = (1/n) Σ (ŷ_i − y_i) 1{ŷ_i ≤ R} x_i x_iᵀ`.
    pub operator: Matrix,
    pub loss: f64,
    /// Examples inside the truncation radius.
    pub kept: usize,
}

impl TruncatedGradient {
    /// Every example was truncated; the gradient is zero.
    pub fn all_truncated(&self) -> bool {
        self.kept == 0
    }
}

/// Gradient of [`truncated_loss`] with the indicator held fixed.
pub fn truncated_gradient(u: &Matrix, data: &QuadDataset, rcut: f64) -> Result<TruncatedGradient> {
    truncated_gradient_on(u, data, rcut, None)
}

fn truncated_gradient_on(u: &Matrix, data: &QuadDataset, rcut: f64, batch: Option<&[usize]>) -> Result<TruncatedGradient> {
    check_rcut(rcut)?;
    data.check_factor(u)?;
    let d = data.d;
    let count = batch.map_or(data.n(), |b| b.len());
    let inv = 1.0 / count as f64;
    let mut acc = vec![0.0; packed_len(d)];
    let mut loss = 0.0;
    let mut kept = 0;
    // Small batches accumulate 4 s x (Uᵀx)ᵀ directly instead of forming M U.
    let rank_one = count < d;
    let mut gradient = Matrix::zeros(d, u.cols());
    for k in 0..count {
        let i = batch.map_or(k, |b| b[k]);
        let x = data.input(i);
        let v = u.tr_mul_vec(x);
        let yhat = dot(&v, &v);
        if yhat > rcut {
            continue;
        }
        kept += 1;
        let r = yhat - data.labels[i];
        loss += r * r;
        let s = r * inv;
        if rank_one {
            let g = gradient.as_mut_slice();
            let cols = v.len();
            for j in 0..d {
                let sj = 4.0 * s * x[j];
                for (gc, vc) in g[j * cols..(j + 1) * cols].iter_mut().zip(&v) {
                    *gc += sj * vc;
                }
            }
        }
        let mut idx = 0;
        for j in 0..d {
            let sj = s * x[j];
            for l in j..d {
                acc[idx] += sj * x[l];
                idx += 1;
            }
        }
    }
    let operator = unpack_symmetric(&acc, d);
    if !rank_one {
        gradient = operator.matmul(u).scale(4.0);
    }
    Ok(TruncatedGradient {
        gradient,
        operator,
        loss: loss * inv,
        kept,
    })
}

fn rescale_denominator(u: &Matrix, eta: f64, tau: f64, mode: Rescale) -> Option<f64> {
    let c = u.frobenius_norm_sq() - tau;
    match mode {
        Rescale::Verbatim => Some(1.0 - eta * c),
        Rescale::Matched => Some(1.0 - 4.0 * eta * c),
        Rescale::Off => None,
    }
}

fn rescaled_step(u: &Matrix, grad: &TruncatedGradient, eta: f64, tau: f64, mode: Rescale) -> std::result::Result<Matrix, f64> {
    let mut next = u.clone();
    next.axpy(-eta, &grad.gradient);
    match rescale_denominator(u, eta, tau, mode) {
        Some(den) if den.abs() <= RESCALE_TOL => Err(den),
        Some(den) => {
            next.scale_in_place(1.0 / den);
            Ok(next)
        }
        None => Ok(next),
    }
}

/// One Algorithm 1 step: `Ũ = U − η∇f̃(U)`, then `Ũ / (1 − η(‖U‖_F² − τ))`
/// (denominator per `cfg.rescale`).
pub fn algorithm1_step(u: &Matrix, data: &QuadDataset, cfg: &QuadConfig, tau: f64) -> Result<Matrix> {
    let grad = truncated_gradient(u, data, cfg.effective_rcut(data.d))?;
    rescaled_step(u, &grad, cfg.eta, tau, cfg.rescale)
        .map_err(|denominator| Error::DegenerateRescale { iteration: 0, denominator })
}

fn evaluator<'a>(data: &'a QuadDataset, rcut: f64) -> impl Fn(&Matrix) -> Result<(Option<f64>, Option<f64>)> + 'a {
    let energy: f64 = data.labels.iter().map(|y| y * y).sum();
    move |x: &Matrix| {
        let mut sq = 0.0;
        let mut loss = 0.0;
        for i in 0..data.n() {
            let xi = data.input(i);
            let yhat = dot(xi, &x.mul_vec(xi));
            let r = yhat - data.labels[i];
            sq += r * r;
            if yhat <= rcut {
                loss += r * r;
            }
        }
        Ok((relative_train_error(sq, energy), Some(loss / data.n() as f64)))
    }
}

fn check_pair(gt: &GroundTruth, data: &QuadDataset) -> Result<()> {
    if gt.d != data.d {
        return Err(Error::dims(format!("d = {}", gt.d), format!("d = {}", data.d)));
    }
    Ok(())
}

/// Algorithm 1 for `cfg.iterations` steps. The recorded population risk is
/// the generalization error `‖U Uᵀ − X*‖_F²`.
pub fn run_algorithm1(
    gt: &GroundTruth,
    data: &QuadDataset,
    cfg: &QuadConfig,
    hooks: &mut [&mut dyn ProbeHook],
) -> Result<Trajectory> {
    cfg.validate()?;
    check_pair(gt, data)?;
    let rcut = cfg.effective_rcut(data.d);
    let tau = tau(data, gt, cfg.tau_mode);
    let u0 = solvers::init_factor(data.d, &cfg.solver_view())?;
    let step = |t: usize, u: &Matrix| -> Result<StepResult> {
        let grad = truncated_gradient(u, data, rcut)?;
        Ok(match rescaled_step(u, &grad, cfg.eta, tau, cfg.rescale) {
            Ok(next) => Ok(StepOutcome {
                next,
                operator: grad.operator,
                eta_eff: 4.0 * cfg.eta,
                train_error_before: None,
            }),
            Err(denominator) => Err(StepFailure {
                status: solvers::RunStatus::DegenerateRescale { iteration: t, denominator },
            }),
        })
    };
    let eval = evaluator(data, rcut);
    solvers::drive_factor(
        gt,
        u0,
        cfg.iterations,
        cfg.record_every,
        None,
        hooks,
        &eval,
        step,
        RunConfig::Algorithm1(cfg.clone()),
    )
}

/// SGD on `f̃`: each step uses `cfg.batch` (default 1) examples drawn
/// uniformly with replacement, followed by the configured rescale.
pub fn run_sgd(
    gt: &GroundTruth,
    data: &QuadDataset,
    cfg: &QuadConfig,
    hooks: &mut [&mut dyn ProbeHook],
) -> Result<Trajectory> {
    cfg.validate()?;
    check_pair(gt, data)?;
    let rcut = cfg.effective_rcut(data.d);
    let tau = tau(data, gt, cfg.tau_mode);
    let u0 = solvers::init_factor(data.d, &cfg.solver_view())?;
    let n = data.n();
    let mut rng = rng::stream(cfg.seed, Stream::SgdIndices);
    let mut batch = vec![0usize; cfg.batch.unwrap_or(1)];
    let step = |t: usize, u: &Matrix| -> Result<StepResult> {
        for i in batch.iter_mut() {
            *i = rand::Rng::random_range(&mut rng, 0..n);
        }
        let grad = truncated_gradient_on(u, data, rcut, Some(&batch))?;
        Ok(match rescaled_step(u, &grad, cfg.eta, tau, cfg.rescale) {
            Ok(next) => Ok(StepOutcome {
                next,
                operator: grad.operator,
                eta_eff: 4.0 * cfg.eta,
                train_error_before: None,
            }),
            Err(denominator) => Err(StepFailure {
                status: solvers::RunStatus::DegenerateRescale { iteration: t, denominator },
            }),
        })
    };
    let eval = evaluator(data, rcut);
    solvers::drive_factor(
        gt,
        u0,
        cfg.iterations,
        cfg.record_every,
        None,
        hooks,
        &eval,
        step,
        RunConfig::QuadSgd(cfg.clone()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit;
    use crate::rng::gaussian_matrix;
    use crate::sensing::{residual_operator, sample_ground_truth, TruthMode};

    fn rand_matrix(seed: u64, r: usize, c: usize) -> Matrix {
        gaussian_matrix(&mut rng::stream(seed, Stream::Probes), r, c)
    }

    fn setup(d: usize, r: usize, n: usize, seed: u64) -> (GroundTruth, QuadDataset) {
        let gt = sample_ground_truth(d, r, 2.0, TruthMode::Experiment, seed).unwrap();
        let data = gen_quad_data(&gt, n, seed + 1).unwrap();
        (gt, data)
    }

    #[test]
    fn small_batch_gradient_matches_operator_form() {
        let (gt, data) = setup(9, 2, 40, 3);
        let u = rand_matrix(5, 9, 9).scale(0.4);
        for batch in [vec![3usize], vec![0, 7, 7, 12], (0..12).collect::<Vec<_>>()] {
            let g = truncated_gradient_on(&u, &data, 30.0, Some(&batch)).unwrap();
            let expect = g.operator.matmul(&u).scale(4.0);
            assert!((&g.gradient - &expect).frobenius_norm() <= 1e-12 * (1.0 + expect.frobenius_norm()));
        }
        assert_eq!(gt.d, 9);
    }

    #[test]
    fn labels_from_zero_and_scalar_truths() {
        let (mut gt, _) = setup(4, 1, 1, 1);
        gt.factor = Matrix::zeros(4, 1);
        let data = gen_quad_data(&gt, 20, 2).unwrap();
        assert!(data.labels.iter().all(|&y| y == 0.0));

        let one = GroundTruth::from_eigen(Matrix::identity(1), vec![1.0], TruthMode::Spec, 0).unwrap();
        let data = gen_quad_data(&one, 30, 3).unwrap();
        for i in 0..30 {
            let x = data.input(i)[0];
            assert!((data.labels[i] - x * x).abs() <= 1e-15);
        }
        assert!(gen_quad_data(&one, 0, 3).is_err());
    }

    #[test]
    fn labels_match_sensing_view() {
        let (gt, data) = setup(6, 2, 50, 4);
        for i in 0..50 {
            let x = data.input(i);
            let view = Matrix::outer(x, x).inner(&gt.xstar);
            assert!((data.labels[i] - view).abs() <= 1e-10);
            assert!(data.labels[i] >= -1e-10);
        }
    }

    #[test]
    fn label_mean_tracks_tau() {
        let (gt, data) = setup(10, 3, 100_000, 5);
        let ratio = data.tau_estimate() / gt.tau();
        assert!((ratio - 1.0).abs() <= 0.05, "ratio {ratio}");
    }

    #[test]
    fn predict_cases() {
        let x = [1.0, -2.0, 0.5];
        assert!((predict(&Matrix::identity(3), &x) - 5.25).abs() <= 1e-15);
        assert_eq!(predict(&Matrix::identity(3), &[0.0; 3]), 0.0);
        let u = rand_matrix(1, 10, 10);
        let x = rand_matrix(2, 10, 1).into_vec();
        let oracle = Matrix::outer(&x, &x).inner(&u.gram_outer());
        assert!((predict(&u, &x) - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn planted_factor_is_stationary() {
        let (gt, data) = setup(6, 2, 40, 6);
        let g = truncated_gradient(&gt.factor, &data, f64::INFINITY).unwrap();
        assert!(g.loss <= 1e-24);
        assert!(g.gradient.max_abs() <= 1e-12);
        assert_eq!(g.kept, 40);
    }

    #[test]
    fn everything_truncated_is_flagged() {
        let (_, data) = setup(5, 1, 30, 7);
        let u = Matrix::identity(5);
        let g = truncated_gradient(&u, &data, 1e-9).unwrap();
        assert!(g.all_truncated());
        assert_eq!(g.gradient.max_abs(), 0.0);
        assert_eq!(truncated_loss(&u, &data, 1e-9).unwrap(), 0.0);
        assert!(truncated_loss(&u, &data, 0.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (_, data) = setup(8, 2, 40, 8);
        let u = rand_matrix(9, 8, 8).scale(0.3);
        let g = truncated_gradient(&u, &data, 1e6).unwrap().gradient;
        let h = 1e-6;
        let mut fd = Matrix::zeros(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                let mut up = u.clone();
                up[(i, j)] += h;
                let mut dn = u.clone();
                dn[(i, j)] -= h;
                fd[(i, j)] = (truncated_loss(&up, &data, 1e6).unwrap() - truncated_loss(&dn, &data, 1e6).unwrap()) / (2.0 * h);
            }
        }
        let rel = (&fd - &g).frobenius_norm() / g.frobenius_norm();
        assert!(rel <= 1e-5, "relative error {rel}");
    }

    #[test]
    fn untruncated_gradient_is_four_times_sensing_direction() {
        let (_, data) = setup(6, 2, 30, 10);
        let ens = data.to_ensemble().unwrap();
        let u = rand_matrix(11, 6, 6).scale(0.4);
        let g = truncated_gradient(&u, &data, f64::INFINITY).unwrap().gradient;
        let sensing = residual_operator(&ens, &u).unwrap().matmul(&u).scale(4.0);
        assert!((&g - &sensing).max_abs() <= 1e-12 * g.max_abs().max(1.0));
    }

    #[test]
    fn algorithm1_step_cases() {
        let (gt, data) = setup(8, 2, 60, 12);
        let mut cfg = QuadConfig::new(0.1, 0.01, 1);
        let tau = gt.tau();

        let u = matkit::haar_from_gaussian(&rand_matrix(13, 8, 8)).unwrap().scale((tau / 8.0).sqrt());
        let next = algorithm1_step(&u, &data, &cfg, tau).unwrap();
        let mut plain = u.clone();
        plain.axpy(-0.01, &truncated_gradient(&u, &data, cfg.effective_rcut(8)).unwrap().gradient);
        assert!((&next - &plain).max_abs() <= 1e-12);

        cfg.eta = 0.0;
        assert_eq!(algorithm1_step(&u, &data, &cfg, tau).unwrap(), u);

        cfg.eta = 0.01;
        let u0 = Matrix::identity(8).scale(0.1);
        let next = algorithm1_step(&u0, &data, &cfg, tau).unwrap();
        let rcut = cfg.effective_rcut(8);
        let mut naive = u0.clone();
        for i in 0..data.n() {
            let x = data.input(i);
            let mut yhat = 0.0;
            for c in 0..8 {
                let mut s = 0.0;
                for k in 0..8 {
                    s += u0[(k, c)] * x[k];
                }
                yhat += s * s;
            }
            if yhat > rcut {
                continue;
            }
            let coef = 4.0 * 0.01 * (yhat - data.labels[i]) / data.n() as f64;
            let xxu = Matrix::outer(x, x).matmul(&u0);
            naive.axpy(-coef, &xxu);
        }
        let naive = naive.scale(1.0 / (1.0 - 0.01 * (u0.frobenius_norm_sq() - tau)));
        assert!((&next - &naive).max_abs() <= 1e-12);
    }

    #[test]
    fn degenerate_rescale_aborts() {
        let (gt, data) = setup(4, 1, 20, 14);
        let u = Matrix::identity(4);
        let mut cfg = QuadConfig::new(1.0, 0.0, 1);
        cfg.eta = 1.0 / (4.0 - gt.tau());
        let err = algorithm1_step(&u, &data, &cfg, gt.tau()).unwrap_err();
        assert!(matches!(err, Error::DegenerateRescale { .. }));
    }

    #[test]
    fn exact_and_estimated_tau_agree_when_equal() {
        let (mut gt, data) = setup(6, 2, 80, 15);
        let est = data.tau_estimate();
        // Rescale the factor so that the exact τ coincides with the estimate.
        gt.factor.scale_in_place((est / gt.tau()).sqrt());
        let mut cfg = QuadConfig::new(0.05, 0.002, 40);
        let a = run_algorithm1(&gt, &data, &cfg, &mut []).unwrap();
        cfg.tau_mode = TauMode::Estimated;
        let b = run_algorithm1(&gt, &data, &cfg, &mut []).unwrap();
        let diff = (&a.final_factor.unwrap() - &b.final_factor.unwrap()).max_abs();
        assert!(diff <= 1e-9, "difference {diff}");
    }

    #[test]
    fn sgd_is_deterministic_and_zero_step_is_constant() {
        let (gt, data) = setup(5, 1, 40, 16);
        let mut cfg = QuadConfig::new(0.1, 0.001, 50);
        cfg.rescale = Rescale::Off;
        let a = run_sgd(&gt, &data, &cfg, &mut []).unwrap();
        let b = run_sgd(&gt, &data, &cfg, &mut []).unwrap();
        assert_eq!(a.csv_string(), b.csv_string());
        cfg.eta = 0.0;
        let c = run_sgd(&gt, &data, &cfg, &mut []).unwrap();
        assert_eq!(c.final_factor.unwrap(), Matrix::identity(5).scale(0.1));
    }

    #[test]
    fn algorithm1_reduces_generalization_error() {
        let (gt, data) = setup(10, 2, 400, 17);
        let mut cfg = QuadConfig::new(1e-3, 0.005, 2000);
        cfg.record_every = 500;
        let traj = run_algorithm1(&gt, &data, &cfg, &mut []).unwrap();
        assert_eq!(traj.status, solvers::RunStatus::Completed);
        assert!(traj.final_test_error() < 0.2, "test error {}", traj.final_test_error());
        assert!(traj.last().train_loss.is_some());
    }
}
