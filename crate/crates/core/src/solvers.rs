//! Factorized gradient descent, SGD and the projected-gradient baseline.
//!
//! Factorized runs iterate `U_{t+1} = (I − η M_t) U_t` from `U_0 = α B`,
//! where `M_t = (1/m) Σ (⟨A_i, U_t U_tᵀ⟩ − y_i) A_i` (empirical mode) or
//! `M_t = U_t U_tᵀ − X*` (population mode).

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{self, Matrix};
use crate::probes::{DiagRecord, ProbeHook};
use crate::quadnet::QuadConfig;
use crate::rng::{self, Stream};
use crate::sensing::{relative_train_error, test_metrics, GroundTruth, MeasurementEnsemble};

/// `‖U‖_F` above `DIVERGENCE_FACTOR · max(1, ‖X*‖_F^{1/2})` aborts a run.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

pub const CSV_HEADER: &str = "t,train_error,test_error,population_risk,sigma_rp1,sin_zu,norm_E,sigmin_R,norm_Z,norm_F";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitBasis {
    #[default]
    Identity,
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Empirical,
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// One fresh uniform index per batch slot.
    #[default]
    WithReplacement,
    /// A uniformly random subset of distinct sensors.
    WithoutReplacement,
}

fn default_record_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub eta: f64,
    #[serde(alias = "T")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init_basis: InitBasis,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub batch: Option<usize>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub stop_train_error: Option<f64>,
}

impl SolverConfig {
    pub fn new(alpha: f64, eta: f64, iterations: usize) -> Self {
        SolverConfig {
            alpha,
            eta,
            iterations,
            seed: 0,
            init_basis: InitBasis::Identity,
            mode: Mode::Empirical,
            batch: None,
            sampling: Sampling::WithReplacement,
            record_every: default_record_every(),
            stop_train_error: None,
        }
    }

    /// `η = 0` and `T = 0` are accepted as degenerate runs.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be non-negative, got {}", self.eta)));
        }
        if self.batch == Some(0) {
            return Err(Error::InvalidArgument("batch must be at least 1".into()));
        }
        if let Some(s) = self.stop_train_error {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!("stop_train_error must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Configuration echoed into a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum RunConfig {
    Gd(SolverConfig),
    Sgd(SolverConfig),
    /// PGD starts from `X_0 = 0` unless `x0_given`.
    Pgd { config: SolverConfig, x0_given: bool },
    Algorithm1(QuadConfig),
    QuadSgd(QuadConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    pub train_error: Option<f64>,
    pub test_error: f64,
    pub population_risk: f64,
    /// Objective value where the trainer defines one (quadratic networks).
    pub train_loss: Option<f64>,
    pub diag: Option<DiagRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    EarlyStopped { iteration: usize },
    Diverged { iteration: usize },
    DegenerateRescale { iteration: usize, denominator: f64 },
}

impl RunStatus {
    /// The numerical error matching an aborted run.
    pub fn error(&self) -> Option<Error> {
        match *self {
            RunStatus::Diverged { iteration } => Some(Error::Diverged { iteration }),
            RunStatus::DegenerateRescale { iteration, denominator } => {
                Some(Error::DegenerateRescale { iteration, denominator })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    /// `X̂ = U_T U_Tᵀ`, or the PGD iterate.
    pub final_estimate: Matrix,
    /// `U_T` for factorized runs.
    pub final_factor: Option<Matrix>,
    pub config: RunConfig,
    pub status: RunStatus,
    pub wall_time_secs: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl Trajectory {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("trajectory has a t = 0 checkpoint")
    }

    pub fn final_test_error(&self) -> f64 {
        self.last().test_error
    }

    pub fn final_train_error(&self) -> Option<f64> {
        self.last().train_error
    }

    pub fn is_aborted(&self) -> bool {
        self.status.error().is_some()
    }

    /// Checkpoint table in the CSV schema of [`CSV_HEADER`]; missing
    /// values are empty fields. Wall time is not written.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for c in &self.checkpoints {
            let d = c.diag.as_ref();
            writeln!(
                w,
                "{},{},{:e},{:e},{},{},{},{},{},{}",
                c.t,
                fmt_opt(c.train_error),
                c.test_error,
                c.population_risk,
                fmt_opt(d.map(|d| d.sigma_rp1)),
                fmt_opt(d.map(|d| d.sin_zu)),
                fmt_opt(d.map(|d| d.norm_e)),
                fmt_opt(d.map(|d| d.sigmin_r)),
                fmt_opt(d.map(|d| d.norm_z)),
                fmt_opt(d.map(|d| d.norm_f)),
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

fn is_log_checkpoint(t: usize) -> bool {
    let mut p = 1usize;
    while p <= t {
        if t == p || t == 2 * p || t == 5 * p {
            return true;
        }
        match p.checked_mul(10) {
            Some(next) => p = next,
            None => break,
        }
    }
    false
}

/// Whether iteration `t` of a `T`-step run is recorded: `t = 0`, `t = T`,
/// multiples of `record_every` and the early points `{1, 2, 5, 10, 20, …}`.
pub fn is_checkpoint(t: usize, iterations: usize, record_every: usize) -> bool {
    t == 0 || t == iterations || (record_every > 0 && t % record_every == 0) || is_log_checkpoint(t)
}

/// `U_0 = α B` with `B = I` or a Haar orthogonal matrix drawn from `seed`.
pub fn init_factor(d: usize, cfg: &SolverConfig) -> Result<Matrix> {
    cfg.validate()?;
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let basis = match cfg.init_basis {
        InitBasis::Identity => Matrix::identity(d),
        InitBasis::Haar => {
            let mut r = rng::stream(cfg.seed, Stream::Init);
            matkit::haar_from_gaussian(&rng::gaussian_matrix(&mut r, d, d))?
        }
    };
    Ok(basis.scale(cfg.alpha))
}

/// `U − η M U` for a given operator `M`.
pub fn apply_operator_step(u: &Matrix, operator: &Matrix, eta: f64) -> Matrix {
    let mut next = u.clone();
    next.axpy(-eta, &operator.matmul(u));
    next
}

/// One empirical step `(I − η M_t) U`. Equals `U − (η/2)·gradient(U)`
/// bit for bit since the gradient is `2 M_t U`.
pub fn gd_step(u: &Matrix, ens: &MeasurementEnsemble, eta: f64) -> Result<Matrix> {
    ens.check_rows(u)?;
    let (m, _) = ens.residual_pass(&u.gram_outer())?;
    let next = apply_operator_step(u, &m, eta);
    next.ensure_finite()?;
    Ok(next)
}

/// `U U ᵀ − X*`.
pub fn population_operator(u: &Matrix, gt: &GroundTruth) -> Result<Matrix> {
    if u.rows() != gt.d {
        return Err(Error::dims(format!("{} rows", gt.d), format!("{} rows", u.rows())));
    }
    Ok(&u.gram_outer() - &gt.xstar)
}

/// One population step `(I − η(UUᵀ − X*)) U`.
pub fn population_gd_step(u: &Matrix, gt: &GroundTruth, eta: f64) -> Result<Matrix> {
    let m = population_operator(u, gt)?;
    let next = apply_operator_step(u, &m, eta);
    next.ensure_finite()?;
    Ok(next)
}

/// Relative training error `‖A(X) − y‖ / ‖y‖`; `None` for all-zero labels.
pub fn train_error(ens: &MeasurementEnsemble, x: &Matrix) -> Result<Option<f64>> {
    let preds = ens.measure(x)?;
    let sq: f64 = preds.iter().zip(ens.labels()).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(relative_train_error(sq, ens.label_energy()))
}

pub(crate) fn divergence_bound(gt: &GroundTruth) -> f64 {
    DIVERGENCE_FACTOR * gt.frobenius().sqrt().max(1.0)
}

/// One iteration reported by a factor-space step function.
pub(crate) struct StepOutcome {
    pub next: Matrix,
    /// `M` such that the update is `c · (I − η_eff M) U` for a scalar `c`.
    pub operator: Matrix,
    pub eta_eff: f64,
    /// Relative training error of the iterate before the step, if known.
    pub train_error_before: Option<f64>,
}

pub(crate) struct StepFailure {
    pub status: RunStatus,
}

pub(crate) type StepResult = std::result::Result<StepOutcome, StepFailure>;

/// Per-checkpoint evaluation of an iterate: `(train_error, train_loss)`.
pub(crate) type Evaluator<'a> = dyn Fn(&Matrix) -> Result<(Option<f64>, Option<f64>)> + 'a;

/// Shared loop for factor-space trainers: checkpoints, probes, divergence
/// guard and early stopping.
pub(crate) fn drive_factor(
    gt: &GroundTruth,
    u0: Matrix,
    iterations: usize,
    record_every: usize,
    stop_train_error: Option<f64>,
    hooks: &mut [&mut dyn ProbeHook],
    evaluate: &Evaluator<'_>,
    mut step: impl FnMut(usize, &Matrix) -> Result<StepResult>,
    config: RunConfig,
) -> Result<Trajectory> {
    let start = Instant::now();
    let bound = divergence_bound(gt);
    let mut checkpoints = Vec::new();
    let mut u = u0;
    let record = |t: usize, u: &Matrix, hooks: &mut [&mut dyn ProbeHook]| -> Result<Checkpoint> {
        let mut diag = None;
        for h in hooks.iter_mut() {
            if let Some(rec) = h.record(t, u)? {
                diag.get_or_insert(rec);
            }
        }
        let x = u.gram_outer();
        let (train_error, train_loss) = evaluate(&x)?;
        let (test_error, population_risk) = test_metrics(gt, &x);
        Ok(Checkpoint {
            t,
            train_error,
            test_error,
            population_risk,
            train_loss,
            diag,
        })
    };
    checkpoints.push(record(0, &u, hooks)?);
    let mut status = RunStatus::Completed;
    for t in 0..iterations {
        let outcome = match step(t, &u)? {
            Ok(o) => o,
            Err(f) => {
                status = f.status;
                break;
            }
        };
        if let (Some(th), Some(te)) = (stop_train_error, outcome.train_error_before) {
            if te < th {
                if checkpoints.last().map(|c| c.t) != Some(t) {
                    checkpoints.push(record(t, &u, hooks)?);
                }
                status = RunStatus::EarlyStopped { iteration: t };
                break;
            }
        }
        let diverged = !outcome.next.is_finite() || outcome.next.frobenius_norm() > bound;
        if diverged {
            status = RunStatus::Diverged { iteration: t + 1 };
            break;
        }
        for h in hooks.iter_mut() {
            h.observe_step(&outcome.operator, outcome.eta_eff)?;
        }
        u = outcome.next;
        if is_checkpoint(t + 1, iterations, record_every) {
            checkpoints.push(record(t + 1, &u, hooks)?);
        }
    }
    Ok(Trajectory {
        final_estimate: u.gram_outer(),
        final_factor: Some(u),
        checkpoints,
        config,
        status,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn ensemble_evaluator(ens: Option<&MeasurementEnsemble>) -> impl Fn(&Matrix) -> Result<(Option<f64>, Option<f64>)> + '_ {
    move |x: &Matrix| match ens {
        Some(e) => Ok((train_error(e, x)?, None)),
        None => Ok((None, None)),
    }
}

fn check_pair(gt: &GroundTruth, ens: Option<&MeasurementEnsemble>) -> Result<()> {
    if let Some(e) = ens {
        if e.d() != gt.d {
            return Err(Error::dims(format!("d = {}", gt.d), format!("d = {}", e.d())));
        }
    }
    Ok(())
}

/// Full-batch factorized GD. Population mode ignores `ens` for the update
/// but still reports training error on it when given.
pub fn run_gd(
    gt: &GroundTruth,
    ens: Option<&MeasurementEnsemble>,
    cfg: &SolverConfig,
    hooks: &mut [&mut dyn ProbeHook],
) -> Result<Trajectory> {
    cfg.validate()?;
    check_pair(gt, ens)?;
    let u0 = init_factor(gt.d, cfg)?;
    let energy = ens.map(|e| e.label_energy());
    let step = |_t: usize, u: &Matrix| -> Result<StepResult> {
        let (operator, train_error_before) = match (cfg.mode, ens) {
            (Mode::Empirical, Some(e)) => {
                let (m, sq) = e.residual_pass(&u.gram_outer())?;
                (m, relative_train_error(sq, energy.unwrap_or(0.0)))
            }
            (Mode::Empirical, None) => {
                return Err(Error::InvalidArgument("empirical mode needs an ensemble".into()))
            }
            (Mode::Population, _) => (population_operator(u, gt)?, None),
        };
        Ok(Ok(StepOutcome {
            next: apply_operator_step(u, &operator, cfg.eta),
            operator,
            eta_eff: cfg.eta,
            train_error_before,
        }))
    };
    let eval = ensemble_evaluator(ens);
    drive_factor(
        gt,
        u0,
        cfg.iterations,
        cfg.record_every,
        cfg.stop_train_error,
        hooks,
        &eval,
        step,
        RunConfig::Gd(cfg.clone()),
    )
}

/// Mini-batch SGD: each step forms `M_t` from a random batch of sensors.
/// A batch of at least `m` uses every sensor in order, matching [`run_gd`].
pub fn run_sgd(
    gt: &GroundTruth,
    ens: &MeasurementEnsemble,
    cfg: &SolverConfig,
    hooks: &mut [&mut dyn ProbeHook],
) -> Result<Trajectory> {
    cfg.validate()?;
    check_pair(gt, Some(ens))?;
    let batch = cfg
        .batch
        .ok_or_else(|| Error::InvalidArgument("SGD needs a batch size".into()))?;
    if cfg.mode == Mode::Population {
        return Err(Error::InvalidArgument("SGD runs in empirical mode only".into()));
    }
    let u0 = init_factor(gt.d, cfg)?;
    let m = ens.m();
    let mut rng = rng::stream(cfg.seed, Stream::SgdIndices);
    let mut indices = vec![0usize; batch.min(m)];
    let step = |_t: usize, u: &Matrix| -> Result<StepResult> {
        let g = u.gram_outer();
        let operator = if batch >= m {
            ens.residual_pass(&g)?.0
        } else {
            match cfg.sampling {
                Sampling::WithReplacement => {
                    for i in indices.iter_mut() {
                        *i = rand::Rng::random_range(&mut rng, 0..m);
                    }
                }
                Sampling::WithoutReplacement => {
                    let picked = rand::seq::index::sample(&mut rng, m, batch);
                    for (slot, i) in indices.iter_mut().zip(picked.iter()) {
                        *slot = i;
                    }
                }
            }
            ens.residual_pass_on(&g, &indices)?.0
        };
        Ok(Ok(StepOutcome {
            next: apply_operator_step(u, &operator, cfg.eta),
            operator,
            eta_eff: cfg.eta,
            train_error_before: None,
        }))
    };
    let eval = ensemble_evaluator(Some(ens));
    drive_factor(
        gt,
        u0,
        cfg.iterations,
        cfg.record_every,
        None,
        hooks,
        &eval,
        step,
        RunConfig::Sgd(cfg.clone()),
    )
}

/// Projected gradient descent on `f(X) = (1/m) Σ (⟨A_i,X⟩ − y_i)²` over the
/// PSD cone, from `X_0 = 0`.
pub fn run_pgd(gt: &GroundTruth, ens: &MeasurementEnsemble, cfg: &SolverConfig) -> Result<Trajectory> {
    run_pgd_from(gt, ens, cfg, None)
}

/// `∇f(X) = (2/m) Σ (⟨A_i,X⟩ − y_i) A_i` and the squared residual norm.
pub fn pgd_gradient(ens: &MeasurementEnsemble, x: &Matrix) -> Result<(Matrix, f64)> {
    let (m, sq) = ens.residual_pass(x)?;
    Ok((m.scale(2.0), sq))
}

pub fn run_pgd_from(
    gt: &GroundTruth,
    ens: &MeasurementEnsemble,
    cfg: &SolverConfig,
    x0: Option<&Matrix>,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_pair(gt, Some(ens))?;
    let start = Instant::now();
    let d = gt.d;
    let mut x = match x0 {
        Some(x0) => {
            ens.check_square(x0)?;
            matkit::psd_project(x0)?
        }
        None => Matrix::zeros(d, d),
    };
    let energy = ens.label_energy();
    let bound = divergence_bound(gt).powi(2);
    let make = |t: usize, x: &Matrix, te: Option<f64>| {
        let (test_error, population_risk) = test_metrics(gt, x);
        Checkpoint {
            t,
            train_error: te,
            test_error,
            population_risk,
            train_loss: None,
            diag: None,
        }
    };
    let mut checkpoints = Vec::new();
    let mut status = RunStatus::Completed;
    let mut t = 0;
    loop {
        let (grad, sq) = pgd_gradient(ens, &x)?;
        let te = relative_train_error(sq, energy);
        let stop = matches!((cfg.stop_train_error, te), (Some(th), Some(e)) if e < th);
        if t == 0 || stop || is_checkpoint(t, cfg.iterations, cfg.record_every) {
            checkpoints.push(make(t, &x, te));
        }
        if stop {
            status = RunStatus::EarlyStopped { iteration: t };
            break;
        }
        if t == cfg.iterations {
            break;
        }
        let mut next = x.clone();
        next.axpy(-cfg.eta, &grad);
        if !next.is_finite() {
            status = RunStatus::Diverged { iteration: t + 1 };
            break;
        }
        x = matkit::psd_project(&next)?;
        t += 1;
        if x.frobenius_norm() > bound {
            status = RunStatus::Diverged { iteration: t };
            break;
        }
    }
    Ok(Trajectory {
        checkpoints,
        final_estimate: x,
        final_factor: None,
        config: RunConfig::Pgd {
            config: cfg.clone(),
            x0_given: x0.is_some(),
        },
        status,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
