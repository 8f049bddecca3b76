//! Over-parameterized low-rank matrix sensing.
//!
//! The crate recovers a planted positive semidefinite matrix `X* = U* Σ* U*ᵀ`
//! from Gaussian linear measurements by running gradient descent on a full
//! `d × d` factor `U` started at a small scale `α`. Alongside the solvers it
//! ships Monte-Carlo estimators for the restricted isometry constant, a
//! one-hidden-layer quadratic-activation network trainer with weight
//! rescaling, and probes that split each iterate into signal and error parts.
//!
//! Module map:
//!
//! * [`matkit`]: dense matrix type and factorizations (SVD, eigen, QR),
//!   norms, projectors and principal angles.
//! * [`sensing`]: ground truth, measurement ensembles, the measurement
//!   operator, losses, gradients and error metrics.
//! * [`ripcheck`]: RIP estimation and residual oracles for the RIP lemmas.
//! * [`solvers`]: factorized GD (empirical and population), SGD and the
//!   projected-gradient baseline in `X` space.
//! * [`quadnet`]: quadratic-activation networks and the rescaled trainer.
//! * [`probes`]: adaptive-subspace diagnostics attached to solver runs.
//! * [`container`]: binary persistence for ground truths and ensembles.

pub mod container;
pub mod error;
pub mod matkit;
pub mod probes;
pub mod quadnet;
pub mod ripcheck;
pub mod rng;
pub mod sensing;
pub mod solvers;

pub use error::{Error, Result};
pub use matkit::Matrix;
