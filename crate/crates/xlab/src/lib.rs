//! Experiment runner for the matrix sensing library: presets for the five
//! experiment figures, seeded sweeps, summary tables and SVG charts.

pub mod chart;
pub mod cli;
pub mod config;
pub mod presets;
pub mod runner;
pub mod summary;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum XlabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sensing_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed table {path}: {reason}")]
    Table { path: PathBuf, reason: String },
    #[error("numerical abort: {0}")]
    Aborted(String),
}

impl XlabError {
    /// Process exit code: 2 for numerical aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            XlabError::Aborted(_) => 2,
            XlabError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        XlabError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, XlabError>;

pub use config::{Cell, ChartKind, ChartSpec, ExperimentSpec, Metric, Preset, SCHEMA_VERSION};
pub use runner::{run_experiment, ExperimentOutcome, RunRecord};
pub use summary::{Stat, SummaryTable};
