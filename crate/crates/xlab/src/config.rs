//! JSON experiment configuration.

use std::collections::HashSet;
use std::path::Path;

use sensing_core::solvers::RunConfig;
use serde::{Deserialize, Serialize};

use crate::{Result, XlabError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    /// Error against iteration, one series per cell.
    #[default]
    Curves,
    /// Final error against each cell's `x`, one series per `series` name.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Test,
    Train,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    #[serde(default)]
    pub kind: ChartKind,
    #[serde(default)]
    pub metric: Metric,
    /// Checkpoints with `t` below this are left out of curve charts.
    #[serde(default)]
    pub skip_initial: usize,
    #[serde(default)]
    pub title: Option<String>,
}

impl Default for ChartSpec {
    fn default() -> Self {
        ChartSpec {
            kind: ChartKind::Curves,
            metric: Metric::Test,
            skip_initial: 0,
            title: None,
        }
    }
}

/// One configuration of a sweep, run `repeats` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    /// File-safe name: ASCII letters, digits, `_`, `-` and `.`.
    pub label: String,
    pub d: usize,
    pub r: usize,
    /// Sensing matrices `m`, or examples `n` for quadratic networks.
    pub samples: usize,
    pub run: RunConfig,
    /// Attach the subspace diagnostics (factorized sensing runs only).
    #[serde(default)]
    pub probes: bool,
    #[serde(default)]
    pub series: Option<String>,
    #[serde(default)]
    pub x: Option<f64>,
}

/// A seeded sweep. The ground truth of every cell is drawn from
/// `seed_base`; repeat `k` resamples the measurements (and the run's own
/// randomness) from `seed_base + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub preset: Preset,
    #[serde(default)]
    pub desk_scale: bool,
    pub repeats: usize,
    pub seed_base: u64,
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub chart: ChartSpec,
}

pub(crate) fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(XlabError::Config(format!("label {label:?} must be non-empty and use only [A-Za-z0-9_.-]")))
    }
}

impl Cell {
    pub fn validate(&self) -> Result<()> {
        check_label(&self.label)?;
        if let Some(s) = &self.series {
            check_label(s)?;
        }
        if self.d == 0 || self.r == 0 || self.r > self.d {
            return Err(XlabError::Config(format!(
                "cell {}: need 1 <= r <= d, got d={} r={}",
                self.label, self.d, self.r
            )));
        }
        if self.samples == 0 {
            return Err(XlabError::Config(format!("cell {}: samples must be at least 1", self.label)));
        }
        match &self.run {
            RunConfig::Gd(c) | RunConfig::Sgd(c) => c.validate()?,
            RunConfig::Pgd { config, x0_given } => {
                config.validate()?;
                if *x0_given {
                    return Err(XlabError::Config(format!(
                        "cell {}: sweeps start PGD from zero",
                        self.label
                    )));
                }
            }
            RunConfig::Algorithm1(q) | RunConfig::QuadSgd(q) => q.validate()?,
        }
        if self.probes && !matches!(self.run, RunConfig::Gd(_) | RunConfig::Sgd(_)) {
            return Err(XlabError::Config(format!(
                "cell {}: probes are only wired for gd and sgd cells",
                self.label
            )));
        }
        if let Some(x) = self.x {
            if !x.is_finite() {
                return Err(XlabError::Config(format!("cell {}: x must be finite", self.label)));
            }
        }
        Ok(())
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(XlabError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        check_label(&self.name)?;
        if self.repeats == 0 {
            return Err(XlabError::Config("repeats must be at least 1".into()));
        }
        if self.cells.is_empty() {
            return Err(XlabError::Config("no cells".into()));
        }
        let mut seen = HashSet::new();
        for cell in &self.cells {
            cell.validate()?;
            if !seen.insert(cell.label.as_str()) {
                return Err(XlabError::Config(format!("duplicate cell label {}", cell.label)));
            }
            if self.chart.kind == ChartKind::Final && cell.x.is_none() {
                return Err(XlabError::Config(format!(
                    "cell {}: final-error charts need an x value per cell",
                    cell.label
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| XlabError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Seed of the measurement draw and solver randomness for repeat `k`.
    pub fn repeat_seed(&self, k: usize) -> u64 {
        self.seed_base.wrapping_add(k as u64)
    }

    pub fn total_runs(&self) -> usize {
        self.cells.len() * self.repeats
    }
}
