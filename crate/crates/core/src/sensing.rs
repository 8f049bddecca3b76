//! Ground truth, Gaussian measurement ensembles and the sensing objective.
//!
//! Sensors are symmetric, so each `A_i` is stored as its packed upper
//! triangle. Inner products `⟨A_i, Q⟩` are taken against a packed copy of
//! `Q` whose off-diagonal entries hold `Q_jk + Q_kj`, which makes every
//! reduction a plain dot product over `d(d+1)/2` entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, dot, Matrix};
use crate::rng::{self, Stream};

/// Upper bound on the packed sensor storage of one ensemble.
pub const MAX_ENSEMBLE_BYTES: usize = 6_000_000_000;

/// Sensor symmetry tolerance, relative to the largest entry.
pub const SENSOR_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthMode {
    /// Haar-random eigenbasis, spectrum linearly spaced from 1 to 1/κ.
    Spec,
    /// Gaussian factor with unit-norm columns, `X* = U Uᵀ`; κ is emergent.
    Experiment,
}

/// Planted PSD matrix `X* = U* Σ* U*ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub d: usize,
    pub r: usize,
    /// Orthonormal eigenbasis `U*` (d × r).
    pub ustar: Matrix,
    /// Diagonal of `Σ*`, non-increasing.
    pub sigmastar: Vec<f64>,
    pub xstar: Matrix,
    /// `σ₁(X*) / σ_r(X*)`; equals `1/σ_r` whenever `‖X*‖ = 1`.
    pub kappa: f64,
    /// A factor `F` with `F Fᵀ = X*` (network weights in the quadratic model).
    pub factor: Matrix,
    pub mode: TruthMode,
    pub seed: u64,
}

impl GroundTruth {
    /// Builds a ground truth from an orthonormal basis and spectrum.
    pub fn from_eigen(ustar: Matrix, sigmastar: Vec<f64>, mode: TruthMode, seed: u64) -> Result<Self> {
        let (d, r) = ustar.shape();
        if sigmastar.len() != r {
            return Err(Error::dims(format!("{r} eigenvalues"), format!("{}", sigmastar.len())));
        }
        if sigmastar.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("eigenvalues must be positive".into()));
        }
        let mut factor = ustar.clone();
        for i in 0..d {
            for (j, s) in sigmastar.iter().enumerate() {
                factor[(i, j)] *= s.sqrt();
            }
        }
        let xstar = matkit::sym_from_eigen(&sigmastar, &ustar);
        let kappa = sigmastar[0] / sigmastar[r - 1];
        Ok(Self {
            d,
            r,
            ustar,
            sigmastar,
            xstar,
            kappa,
            factor,
            mode,
            seed,
        })
    }

    /// Rank-1 convenience vector `u*` (first eigenvector).
    pub fn u1(&self) -> Vec<f64> {
        self.ustar.column(0)
    }

    /// `τ = ‖F‖_F² = trace(X*)`.
    pub fn tau(&self) -> f64 {
        self.factor.frobenius_norm_sq()
    }

    pub fn frobenius(&self) -> f64 {
        self.xstar.frobenius_norm()
    }
}

pub fn sample_ground_truth(d: usize, r: usize, kappa: f64, mode: TruthMode, seed: u64) -> Result<GroundTruth> {
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!("rank {r} must lie in 1..={d}")));
    }
    let mut rng = rng::stream(seed, Stream::GroundTruth);
    match mode {
        TruthMode::Spec => {
            if !(kappa >= 1.0) || !kappa.is_finite() {
                return Err(Error::InvalidArgument(format!("kappa must be ≥ 1, got {kappa}")));
            }
            let ustar = matkit::haar_from_gaussian(&rng::gaussian_matrix(&mut rng, d, r))?;
            let sigmastar = (0..r)
                .map(|i| {
                    if r == 1 {
                        1.0
                    } else {
                        1.0 - (1.0 - 1.0 / kappa) * i as f64 / (r - 1) as f64
                    }
                })
                .collect();
            GroundTruth::from_eigen(ustar, sigmastar, mode, seed)
        }
        TruthMode::Experiment => {
            let mut g = rng::gaussian_matrix(&mut rng, d, r);
            for j in 0..r {
                let norm = matkit::vec_norm(&g.column(j));
                for i in 0..d {
                    g[(i, j)] /= norm;
                }
            }
            let xstar = g.gram_outer();
            let eig = matkit::sym_eigen(&xstar)?;
            let ustar = eig.vectors.leading_columns(r);
            let sigmastar: Vec<f64> = eig.values[..r].to_vec();
            if sigmastar[r - 1] <= 1e-12 * sigmastar[0] {
                return Err(Error::InvalidArgument("sampled factor is rank deficient".into()));
            }
            Ok(GroundTruth {
                d,
                r,
                ustar,
                kappa: sigmastar[0] / sigmastar[r - 1],
                sigmastar,
                xstar,
                factor: g,
                mode,
                seed,
            })
        }
    }
}

/// `m` symmetric sensors with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    d: usize,
    m: usize,
    packed: Vec<f64>,
    labels: Vec<f64>,
    /// Rank of the ground truth the labels came from (0 if unknown).
    pub rank_hint: usize,
    pub seed: u64,
}

pub fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Packs a symmetric matrix's upper triangle.
pub fn pack_upper(a: &Matrix) -> Vec<f64> {
    let d = a.rows();
    let mut out = Vec::with_capacity(packed_len(d));
    for j in 0..d {
        for k in j..d {
            out.push(a[(j, k)]);
        }
    }
    out
}

/// Packs `Q` so that `dot(pack_upper(A), pack_for_inner(Q)) = ⟨A, Q⟩` for
/// symmetric `A`.
pub fn pack_for_inner(q: &Matrix) -> Vec<f64> {
    let d = q.rows();
    let mut out = Vec::with_capacity(packed_len(d));
    for j in 0..d {
        out.push(q[(j, j)]);
        for k in j + 1..d {
            out.push(q[(j, k)] + q[(k, j)]);
        }
    }
    out
}

pub fn unpack_symmetric(packed: &[f64], d: usize) -> Matrix {
    let mut out = Matrix::zeros(d, d);
    let mut idx = 0;
    for j in 0..d {
        for k in j..d {
            out[(j, k)] = packed[idx];
            out[(k, j)] = packed[idx];
            idx += 1;
        }
    }
    out
}

fn check_budget(d: usize, m: usize) -> Result<()> {
    let bytes = packed_len(d).saturating_mul(m).saturating_mul(8);
    if bytes > MAX_ENSEMBLE_BYTES {
        return Err(Error::InvalidArgument(format!(
            "ensemble d={d}, m={m} needs {bytes} bytes, above the {MAX_ENSEMBLE_BYTES}-byte limit"
        )));
    }
    Ok(())
}

impl MeasurementEnsemble {
    /// Builds an ensemble from explicit sensors; each must be symmetric.
    pub fn from_sensors(sensors: &[Matrix], labels: Vec<f64>) -> Result<Self> {
        let m = sensors.len();
        if m == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one sensor".into()));
        }
        if labels.len() != m {
            return Err(Error::dims(format!("{m} labels"), format!("{}", labels.len())));
        }
        let d = sensors[0].rows();
        check_budget(d, m)?;
        let mut packed = Vec::with_capacity(m * packed_len(d));
        for a in sensors {
            if a.shape() != (d, d) {
                return Err(Error::dims(format!("{d}x{d}"), format!("{}x{}", a.rows(), a.cols())));
            }
            a.ensure_finite()?;
            let asym = a.asymmetry();
            if asym > SENSOR_SYMMETRY_TOL * a.max_abs().max(1.0) {
                return Err(Error::Asymmetric(asym));
            }
            packed.extend(pack_upper(&a.symmetrized()));
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            d,
            m,
            packed,
            labels,
            rank_hint: 0,
            seed: 0,
        })
    }

    /// Builds an ensemble from packed upper triangles.
    pub fn from_packed(d: usize, packed: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let m = labels.len();
        if m == 0 || packed.len() != m * packed_len(d) {
            return Err(Error::dims(
                format!("{} packed entries", m * packed_len(d)),
                format!("{}", packed.len()),
            ));
        }
        check_budget(d, m)?;
        Ok(Self {
            d,
            m,
            packed,
            labels,
            rank_hint: 0,
            seed: 0,
        })
    }

    /// Ensemble with labels recomputed from `xstar`.
    pub fn relabel(&self, xstar: &Matrix) -> Result<Self> {
        self.check_square(xstar)?;
        let w = pack_for_inner(xstar);
        let labels = (0..self.m).map(|i| dot(self.packed_sensor(i), &w)).collect();
        Ok(Self {
            labels,
            ..self.clone()
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn packed_sensor(&self, i: usize) -> &[f64] {
        let p = packed_len(self.d);
        &self.packed[i * p..(i + 1) * p]
    }

    pub fn sensor(&self, i: usize) -> Matrix {
        unpack_symmetric(self.packed_sensor(i), self.d)
    }

    /// Sub-ensemble with the given sensor indices, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut packed = Vec::with_capacity(indices.len() * packed_len(self.d));
        for &i in indices {
            packed.extend_from_slice(self.packed_sensor(i));
        }
        Self {
            d: self.d,
            m: indices.len(),
            packed,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rank_hint: self.rank_hint,
            seed: self.seed,
        }
    }

    pub(crate) fn check_square(&self, q: &Matrix) -> Result<()> {
        if q.shape() != (self.d, self.d) {
            return Err(Error::dims(
                format!("{0}x{0}", self.d),
                format!("{}x{}", q.rows(), q.cols()),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_rows(&self, u: &Matrix) -> Result<()> {
        if u.rows() != self.d {
            return Err(Error::dims(format!("{} rows", self.d), format!("{} rows", u.rows())));
        }
        Ok(())
    }

    /// `⟨A_i, Q⟩` for every sensor.
    pub fn measure(&self, q: &Matrix) -> Result<Vec<f64>> {
        self.check_square(q)?;
        let w = pack_for_inner(q);
        Ok((0..self.m).map(|i| dot(self.packed_sensor(i), &w)).collect())
    }

    /// `(1/m) Σ c_i A_i` with coefficients `c_i`, summed in index order.
    pub fn combine(&self, coeffs: &[f64]) -> Matrix {
        assert_eq!(coeffs.len(), self.m);
        let inv_m = 1.0 / self.m as f64;
        let mut acc = vec![0.0; packed_len(self.d)];
        for (i, &c) in coeffs.iter().enumerate() {
            let s = c * inv_m;
            for (a, &x) in acc.iter_mut().zip(self.packed_sensor(i)) {
                *a += s * x;
            }
        }
        unpack_symmetric(&acc, self.d)
    }

    /// Fused residual pass at `X = g`: returns `M = (1/m) Σ (⟨A_i,g⟩ − y_i) A_i`
    /// and `Σ (⟨A_i,g⟩ − y_i)²`, touching each sensor once.
    pub fn residual_pass(&self, g: &Matrix) -> Result<(Matrix, f64)> {
        self.check_square(g)?;
        let w = pack_for_inner(g);
        let inv_m = 1.0 / self.m as f64;
        let mut acc = vec![0.0; packed_len(self.d)];
        let mut sq = 0.0;
        for i in 0..self.m {
            let a = self.packed_sensor(i);
            let r = dot(a, &w) - self.labels[i];
            sq += r * r;
            let s = r * inv_m;
            for (o, &x) in acc.iter_mut().zip(a) {
                *o += s * x;
            }
        }
        Ok((unpack_symmetric(&acc, self.d), sq))
    }

    /// [`Self::residual_pass`] restricted to `indices` (repeats allowed),
    /// averaged over `indices.len()`.
    pub fn residual_pass_on(&self, g: &Matrix, indices: &[usize]) -> Result<(Matrix, f64)> {
        self.check_square(g)?;
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.m) {
            return Err(Error::InvalidArgument(format!("sensor index {bad} out of range {}", self.m)));
        }
        let w = pack_for_inner(g);
        let inv_b = 1.0 / indices.len() as f64;
        let mut acc = vec![0.0; packed_len(self.d)];
        let mut sq = 0.0;
        for &i in indices {
            let a = self.packed_sensor(i);
            let r = dot(a, &w) - self.labels[i];
            sq += r * r;
            let s = r * inv_b;
            for (o, &x) in acc.iter_mut().zip(a) {
                *o += s * x;
            }
        }
        Ok((unpack_symmetric(&acc, self.d), sq))
    }

    pub fn label_energy(&self) -> f64 {
        self.labels.iter().map(|y| y * y).sum()
    }
}

/// Gaussian sensing ensemble `A_i = (Q_i + Q_iᵀ)/2` labelled by `gt.xstar`.
pub fn sample_gaussian_ensemble(gt: &GroundTruth, m: usize, seed: u64) -> Result<MeasurementEnsemble> {
    sample_gaussian_ensemble_noisy(gt, m, 0.0, seed)
}

/// As [`sample_gaussian_ensemble`], adding `N(0, noise_std²)` to each label.
/// `noise_std = 0` reproduces the noiseless labels bit for bit.
pub fn sample_gaussian_ensemble_noisy(
    gt: &GroundTruth,
    m: usize,
    noise_std: f64,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidArgument(format!("noise_std must be ≥ 0, got {noise_std}")));
    }
    let d = gt.d;
    check_budget(d, m)?;
    let p = packed_len(d);
    let mut rng = rng::stream(seed, Stream::Ensemble);
    let mut packed = Vec::with_capacity(m * p);
    let mut q = vec![0.0; d * d];
    for _ in 0..m {
        for x in q.iter_mut() {
            *x = rng::gaussian(&mut rng);
        }
        for j in 0..d {
            packed.push(q[j * d + j]);
            for k in j + 1..d {
                packed.push(0.5 * (q[j * d + k] + q[k * d + j]));
            }
        }
    }
    let w = pack_for_inner(&gt.xstar);
    let mut labels: Vec<f64> = (0..m).map(|i| dot(&packed[i * p..(i + 1) * p], &w)).collect();
    if noise_std > 0.0 {
        let mut noise = rng::stream(seed, Stream::LabelNoise);
        for y in &mut labels {
            *y += noise_std * rng::gaussian(&mut noise);
        }
    }
    Ok(MeasurementEnsemble {
        d,
        m,
        packed,
        labels,
        rank_hint: gt.r,
        seed,
    })
}

/// `M(Q) = (1/m) Σ ⟨A_i, Q⟩ A_i`.
pub fn apply_map(ens: &MeasurementEnsemble, q: &Matrix) -> Result<Matrix> {
    let c = ens.measure(q)?;
    Ok(ens.combine(&c))
}

/// `M(UUᵀ − X*)` evaluated with the stored labels.
pub fn residual_operator(ens: &MeasurementEnsemble, u: &Matrix) -> Result<Matrix> {
    ens.check_rows(u)?;
    Ok(ens.residual_pass(&u.gram_outer())?.0)
}

/// `f(U) = (1/2m) Σ (y_i − ⟨A_i, UUᵀ⟩)²`.
pub fn loss(ens: &MeasurementEnsemble, u: &Matrix) -> Result<f64> {
    ens.check_rows(u)?;
    let preds = ens.measure(&u.gram_outer())?;
    let sq: f64 = preds.iter().zip(ens.labels()).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(sq / (2.0 * ens.m() as f64))
}

/// `∇f(U) = 2 M_t U` for the symmetric sensors (the descent direction used by
/// the solvers is `M_t U`, i.e. half of this).
pub fn gradient(ens: &MeasurementEnsemble, u: &Matrix) -> Result<Matrix> {
    let m = residual_operator(ens, u)?;
    Ok(m.matmul(u).scale(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `None` when every label is zero.
    pub train_error: Option<f64>,
    pub test_error: f64,
    pub population_risk: f64,
}

pub fn test_metrics(gt: &GroundTruth, x_hat: &Matrix) -> (f64, f64) {
    let diff = x_hat - &gt.xstar;
    let risk = diff.frobenius_norm_sq();
    (risk.sqrt() / gt.frobenius(), risk)
}

pub fn metrics(ens: &MeasurementEnsemble, gt: &GroundTruth, x_hat: &Matrix) -> Result<Metrics> {
    ens.check_square(x_hat)?;
    if gt.d != ens.d() {
        return Err(Error::dims(format!("d = {}", ens.d()), format!("d = {}", gt.d)));
    }
    let preds = ens.measure(x_hat)?;
    let sq: f64 = preds.iter().zip(ens.labels()).map(|(p, y)| (p - y) * (p - y)).sum();
    let (test_error, population_risk) = test_metrics(gt, x_hat);
    Ok(Metrics {
        train_error: relative_train_error(sq, ens.label_energy()),
        test_error,
        population_risk,
    })
}

pub(crate) fn relative_train_error(sq_residual: f64, label_energy: f64) -> Option<f64> {
    (label_energy > 0.0).then(|| (sq_residual / label_energy).sqrt())
}
