//! Trajectory diagnostics: the adaptive subspace `S_t`, the signal/error
//! split `U = Z + E`, the `F`/`R` split of the signal and the rank-1 split.
//!
//! Inequalities from the convergence analysis are evaluated as flags only;
//! their constants are unspecified, so nothing here asserts them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, Matrix, DEFAULT_RANK_TOL};
use crate::sensing::GroundTruth;

/// Singular values of `R` at or below this count as rank deficiency.
pub const RANK_DEFICIENT_TOL: f64 = 1e-10;

/// Orthonormal basis of `S_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    pub basis: Matrix,
    pub t: usize,
    /// Set once `η‖M‖ ≥ 1` was seen; `I − ηM` may then be singular.
    pub degenerate_map: bool,
    /// Set once the advanced basis lost a dimension numerically.
    pub collapsed: bool,
}

impl SubspaceState {
    /// `S_0 = span(U*)`.
    pub fn initial(gt: &GroundTruth) -> Self {
        Self::from_basis(gt.ustar.clone())
    }

    pub fn from_basis(basis: Matrix) -> Self {
        SubspaceState {
            basis,
            t: 0,
            degenerate_map: false,
            collapsed: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// `P_S = B Bᵀ`.
    pub fn projector(&self) -> Matrix {
        self.basis.gram_outer()
    }

    /// `P_S Q` without forming the projector.
    pub fn project(&self, q: &Matrix) -> Matrix {
        self.basis.matmul(&self.basis.transpose().matmul(q))
    }
}

fn exceeds_unit(m: &Matrix, eta: f64) -> Result<bool> {
    let eta = eta.abs();
    if eta * m.frobenius_norm() < 1.0 {
        return Ok(false);
    }
    Ok(eta * matkit::spectral_norm(m)? >= 1.0)
}

/// `S_{t+1} = (I − ηM) S_t`, re-orthonormalized by QR.
pub fn advance_subspace(s: &SubspaceState, m: &Matrix, eta: f64) -> Result<SubspaceState> {
    let d = s.basis.rows();
    if m.shape() != (d, d) {
        return Err(Error::dims(format!("{d}x{d}"), format!("{}x{}", m.rows(), m.cols())));
    }
    let degenerate = exceeds_unit(m, eta)?;
    let mut image = s.basis.clone();
    image.axpy(-eta, &m.matmul(&s.basis));
    let (q, diag) = matkit::qr_orthonormalize(&image)?;
    let largest = diag.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let collapsed = diag.iter().any(|r| r.abs() <= 1e-12 * largest.max(f64::MIN_POSITIVE));
    Ok(SubspaceState {
        basis: q,
        t: s.t + 1,
        degenerate_map: s.degenerate_map || degenerate,
        collapsed: s.collapsed || collapsed,
    })
}

/// `Z = P_S U` (signal) and `E = U − Z` (error).
#[derive(Debug, Clone, PartialEq)]
pub struct ZESplit {
    pub z: Matrix,
    pub e: Matrix,
}

pub fn split_ze(u: &Matrix, s: &SubspaceState) -> Result<ZESplit> {
    if u.rows() != s.basis.rows() {
        return Err(Error::dims(format!("{} rows", s.basis.rows()), format!("{} rows", u.rows())));
    }
    let z = s.project(u);
    let e = u - &z;
    Ok(ZESplit { z, e })
}

/// `R = U*ᵀ Z` and `F = (I − P_{U*}) Z R⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct FRSplit {
    pub r: Matrix,
    pub f: Matrix,
    pub rank_deficient: bool,
    pub sigmin_r: f64,
}

pub fn split_fr(z: &Matrix, gt: &GroundTruth) -> Result<FRSplit> {
    if z.rows() != gt.d {
        return Err(Error::dims(format!("{} rows", gt.d), format!("{} rows", z.rows())));
    }
    let ust = gt.ustar.transpose();
    let r = ust.matmul(z);
    let sv = matkit::singular_values(&r)?;
    let sigmin_r = sv.get(gt.r - 1).copied().unwrap_or(0.0);
    let complement = z - &gt.ustar.matmul(&r);
    let f = complement.matmul(&matkit::pseudo_inverse(&r, DEFAULT_RANK_TOL)?);
    Ok(FRSplit {
        r,
        f,
        rank_deficient: sigmin_r <= RANK_DEFICIENT_TOL,
        sigmin_r,
    })
}

/// Rank-1 split `r_t = Uᵀu*`, `E_t = (I − u*u*ᵀ) U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Split {
    pub r: Vec<f64>,
    pub e: Matrix,
}

pub fn split_rank1(u: &Matrix, gt: &GroundTruth) -> Result<Rank1Split> {
    if gt.r != 1 {
        return Err(Error::InvalidArgument(format!("rank-1 split needs r = 1, got r = {}", gt.r)));
    }
    if u.rows() != gt.d {
        return Err(Error::dims(format!("{} rows", gt.d), format!("{} rows", u.rows())));
    }
    let ustar = gt.u1();
    let r = u.tr_mul_vec(&ustar);
    let mut e = u.clone();
    e.axpy(-1.0, &Matrix::outer(&ustar, &r));
    Ok(Rank1Split { r, e })
}

/// `(1 − ‖r‖²)² + 2‖E r‖² + ‖E Eᵀ‖_F²`; equals `‖UUᵀ − u*u*ᵀ‖_F²`.
pub fn rank1_error_identity(split: &Rank1Split) -> f64 {
    let nr2 = matkit::dot(&split.r, &split.r);
    let er = split.e.mul_vec(&split.r);
    (1.0 - nr2).powi(2) + 2.0 * matkit::dot(&er, &er) + split.e.gram_outer().frobenius_norm_sq()
}

/// Rank-1 fields of a [`DiagRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rank1Record {
    pub norm_r: f64,
    pub norm_e: f64,
    /// `|‖UUᵀ − X*‖_F² − identity|`.
    pub identity_residual: f64,
}

/// Inequality flags tracked along a run; `None` when not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoremFlags {
    pub sin_le_third: bool,
    pub e_within_4x_initial: Option<bool>,
    pub sigmin_r_ge_norm_e: bool,
    pub norm_z_le_5: bool,
    /// `‖F‖ − ‖F‖³ ≤ sin ≤ ‖F‖` (with slack 1e-8), checked when `‖F‖ < 1/3`.
    pub sandwich: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: usize,
    pub sigma_rp1: f64,
    pub sin_zu: f64,
    pub norm_e: f64,
    pub sigmin_r: f64,
    pub norm_z: f64,
    pub norm_f: f64,
    /// `‖U − Z − E‖_F`.
    pub split_residual: f64,
    /// `‖P_S E‖_F`.
    pub leak: f64,
    pub rank_deficient: bool,
    pub subspace_flagged: bool,
    pub flags: TheoremFlags,
    pub rank1: Option<Rank1Record>,
}

pub const SANDWICH_SLACK: f64 = 1e-8;

/// Lemma-style sandwich `‖F‖ − ‖F‖³ ≤ sin ≤ ‖F‖`; `None` unless `‖F‖ < 1/3`.
pub fn sandwich_holds(norm_f: f64, sin: f64) -> Option<bool> {
    (norm_f < 1.0 / 3.0).then(|| {
        norm_f - norm_f.powi(3) - SANDWICH_SLACK <= sin && sin <= norm_f + SANDWICH_SLACK
    })
}

/// All diagnostics for iterate `u` against subspace `s`. `e0_norm` is
/// `‖E_0‖` when known, used for the growth flag.
pub fn diagnostics(u: &Matrix, s: &SubspaceState, gt: &GroundTruth, e0_norm: Option<f64>) -> Result<DiagRecord> {
    let split = split_ze(u, s)?;
    let fr = split_fr(&split.z, gt)?;
    let sv_u = matkit::singular_values(u)?;
    let sigma_rp1 = sv_u.get(gt.r).copied().unwrap_or(0.0);
    // A vanishing signal has no span; report the worst angle.
    let sin_zu = match matkit::principal_angle_sin(&split.z, &gt.ustar) {
        Ok(v) => v,
        Err(Error::InvalidArgument(_)) => 1.0,
        Err(e) => return Err(e),
    };
    let norm_e = matkit::spectral_norm(&split.e)?;
    let norm_z = matkit::spectral_norm(&split.z)?;
    let norm_f = matkit::spectral_norm(&fr.f)?;
    let recon = &(&split.z + &split.e) - u;
    let leak = s.project(&split.e).frobenius_norm();
    let flags = TheoremFlags {
        sin_le_third: sin_zu <= 1.0 / 3.0,
        e_within_4x_initial: e0_norm.map(|e0| norm_e <= 4.0 * e0),
        sigmin_r_ge_norm_e: fr.sigmin_r >= norm_e,
        norm_z_le_5: norm_z <= 5.0,
        sandwich: sandwich_holds(norm_f, sin_zu),
    };
    let rank1 = if gt.r == 1 {
        let r1 = split_rank1(u, gt)?;
        let risk = (&u.gram_outer() - &gt.xstar).frobenius_norm_sq();
        Some(Rank1Record {
            norm_r: matkit::vec_norm(&r1.r),
            norm_e: matkit::spectral_norm(&r1.e)?,
            identity_residual: (risk - rank1_error_identity(&r1)).abs(),
        })
    } else {
        None
    };
    Ok(DiagRecord {
        t: s.t,
        sigma_rp1,
        sin_zu,
        norm_e,
        sigmin_r: fr.sigmin_r,
        norm_z,
        norm_f,
        split_residual: recon.frobenius_norm(),
        leak,
        rank_deficient: fr.rank_deficient,
        subspace_flagged: s.degenerate_map || s.collapsed,
        flags,
        rank1,
    })
}

/// Observer attached to a solver run. `observe_step` sees the operator `M_t`
/// and step size of each update `U ← (I − ηM_t)U` (up to a scalar rescale);
/// `record` is called at checkpoints.
pub trait ProbeHook {
    fn observe_step(&mut self, operator: &Matrix, eta: f64) -> Result<()>;
    fn record(&mut self, t: usize, u: &Matrix) -> Result<Option<DiagRecord>>;
}

/// Maintains `S_t` and produces a [`DiagRecord`] at every checkpoint.
#[derive(Debug, Clone)]
pub struct SubspaceTracker {
    gt: GroundTruth,
    state: SubspaceState,
    e0_norm: Option<f64>,
}

impl SubspaceTracker {
    pub fn new(gt: &GroundTruth) -> Self {
        SubspaceTracker {
            gt: gt.clone(),
            state: SubspaceState::initial(gt),
            e0_norm: None,
        }
    }

    pub fn state(&self) -> &SubspaceState {
        &self.state
    }
}

impl ProbeHook for SubspaceTracker {
    fn observe_step(&mut self, operator: &Matrix, eta: f64) -> Result<()> {
        self.state = advance_subspace(&self.state, operator, eta)?;
        Ok(())
    }

    fn record(&mut self, t: usize, u: &Matrix) -> Result<Option<DiagRecord>> {
        if t != self.state.t {
            return Err(Error::InvalidArgument(format!(
                "probe at step {} asked to record step {t}",
                self.state.t
            )));
        }
        let rec = diagnostics(u, &self.state, &self.gt, self.e0_norm)?;
        if t == 0 {
            self.e0_norm = Some(rec.norm_e);
        }
        Ok(Some(rec))
    }
}
