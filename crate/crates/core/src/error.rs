use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("all labels are zero; relative training error is undefined")]
    ZeroLabels,

    #[error("iterate diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("rescaling denominator {denominator:e} too close to zero at iteration {iteration}")]
    DegenerateRescale { iteration: usize, denominator: f64 },

    #[error("factorization failed to converge")]
    NoConvergence,

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    /// True for failures of the numerical iteration rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::DegenerateRescale { .. } | Error::NoConvergence
        )
    }
}
