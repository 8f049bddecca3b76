//! Sweep execution: every (cell, repeat) pair is an independent job; results
//! are folded back in config order so outputs do not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sensing_core::probes::{ProbeHook, SubspaceTracker};
use sensing_core::quadnet;
use sensing_core::sensing::{sample_gaussian_ensemble, sample_ground_truth, GroundTruth, TruthMode};
use sensing_core::solvers::{self, Mode, RunConfig, Trajectory};

use crate::chart;
use crate::config::{Cell, ExperimentSpec};
use crate::summary::SummaryTable;
use crate::{Result, XlabError};

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub cell: usize,
    pub repeat: usize,
    pub seed: u64,
    /// `Err` carries the message of a run that could not start or finish.
    pub outcome: std::result::Result<Trajectory, String>,
}

impl RunRecord {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
    pub summary: SummaryTable,
}

impl ExperimentOutcome {
    pub fn runs_of(&self, cell: usize) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.cell == cell)
    }

    pub fn cell_index(&self, label: &str) -> Option<usize> {
        self.spec.cells.iter().position(|c| c.label == label)
    }

    /// First numerical abort, if any run diverged.
    pub fn first_abort(&self) -> Option<String> {
        self.runs.iter().find_map(|r| match &r.outcome {
            Ok(t) if t.is_aborted() => Some(format!(
                "{} repeat {}: {}",
                self.spec.cells[r.cell].label,
                r.repeat,
                t.status.error().map(|e| e.to_string()).unwrap_or_default()
            )),
            _ => None,
        })
    }
}

/// The planted truth shared by every repeat of a cell.
pub fn ground_truth(spec: &ExperimentSpec, cell: &Cell) -> Result<GroundTruth> {
    Ok(sample_ground_truth(cell.d, cell.r, 1.0, TruthMode::Experiment, spec.seed_base)?)
}

/// One run of `cell` with measurement and solver seed `seed`.
pub fn run_cell(gt: &GroundTruth, cell: &Cell, seed: u64) -> Result<Trajectory> {
    let mut tracker = SubspaceTracker::new(gt);
    let mut hooks: Vec<&mut dyn ProbeHook> = Vec::new();
    if cell.probes {
        hooks.push(&mut tracker);
    }
    let traj = match &cell.run {
        RunConfig::Gd(c) => {
            let mut cfg = c.clone();
            cfg.seed = seed;
            if cfg.mode == Mode::Population {
                solvers::run_gd(gt, None, &cfg, &mut hooks)?
            } else {
                let ens = sample_gaussian_ensemble(gt, cell.samples, seed)?;
                solvers::run_gd(gt, Some(&ens), &cfg, &mut hooks)?
            }
        }
        RunConfig::Sgd(c) => {
            let mut cfg = c.clone();
            cfg.seed = seed;
            let ens = sample_gaussian_ensemble(gt, cell.samples, seed)?;
            solvers::run_sgd(gt, &ens, &cfg, &mut hooks)?
        }
        RunConfig::Pgd { config, .. } => {
            let mut cfg = config.clone();
            cfg.seed = seed;
            let ens = sample_gaussian_ensemble(gt, cell.samples, seed)?;
            solvers::run_pgd(gt, &ens, &cfg)?
        }
        RunConfig::Algorithm1(q) => {
            let mut cfg = q.clone();
            cfg.seed = seed;
            let data = quadnet::gen_quad_data(gt, cell.samples, seed)?;
            quadnet::run_algorithm1(gt, &data, &cfg, &mut hooks)?
        }
        RunConfig::QuadSgd(q) => {
            let mut cfg = q.clone();
            cfg.seed = seed;
            let data = quadnet::gen_quad_data(gt, cell.samples, seed)?;
            quadnet::run_sgd(gt, &data, &cfg, &mut hooks)?
        }
    };
    Ok(traj)
}

fn execute(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    let truths = spec
        .cells
        .iter()
        .map(|c| ground_truth(spec, c))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..spec.cells.len())
        .flat_map(|c| (0..spec.repeats).map(move |k| (c, k)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(c, k)| {
            let seed = spec.repeat_seed(k);
            RunRecord {
                cell: c,
                repeat: k,
                seed,
                outcome: run_cell(&truths[c], &spec.cells[c], seed).map_err(|e| e.to_string()),
            }
        })
        .collect())
}

/// Runs a validated sweep. With `threads`, the jobs use a dedicated pool
/// of that size; outputs are identical for any thread count.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let runs = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| XlabError::Config(format!("thread pool: {e}")))?
            .install(|| execute(spec))?,
        None => execute(spec)?,
    };
    let summary = SummaryTable::from_runs(spec, &runs);
    Ok(ExperimentOutcome {
        spec: spec.clone(),
        runs,
        summary,
    })
}

pub fn run_file_name(cell: &Cell, repeat: usize) -> String {
    format!("{}_rep{repeat}.csv", cell.label)
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| XlabError::io(path, e))
}

/// Writes `spec.json`, `runs/*.csv`, `summary.csv`, `curves.csv` and
/// `<name>.svg` under `dir`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| XlabError::io(&runs_dir, e))?;
    write(dir.join("spec.json"), outcome.spec.to_json().as_bytes())?;
    for rec in &outcome.runs {
        let cell = &outcome.spec.cells[rec.cell];
        let path = runs_dir.join(run_file_name(cell, rec.repeat));
        match &rec.outcome {
            Ok(t) => write(path, t.csv_string().as_bytes())?,
            Err(msg) => write(path.with_extension("err"), msg.as_bytes())?,
        }
    }
    write(dir.join("summary.csv"), outcome.summary.summary_csv().as_bytes())?;
    write(dir.join("curves.csv"), outcome.summary.curves_csv().as_bytes())?;
    let svg = chart::render_summary(&outcome.summary, &outcome.spec.chart)?;
    write(dir.join(format!("{}.svg", outcome.spec.name)), svg.as_bytes())
}
