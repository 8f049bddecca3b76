//! `xlab` command line. Exit codes: 0 success, 1 usage or validation error,
//! 2 numerical abort.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sensing_core::container;
use sensing_core::quadnet::{self, QuadConfig, Rescale, TauMode};
use sensing_core::ripcheck::{self, ProbeKind, RipOptions};
use sensing_core::sensing::{sample_gaussian_ensemble, sample_ground_truth, TruthMode};
use sensing_core::solvers::{RunConfig, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{check_label, Cell, ExperimentSpec, Metric, Preset, SCHEMA_VERSION};
use crate::runner::{run_cell, run_experiment, write_outputs};
use crate::summary::SummaryTable;
use crate::{chart, Result, XlabError};

#[derive(Debug, Parser)]
#[command(name = "xlab", version, about = "Over-parameterized matrix sensing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a ground truth and its measurements into binary files.
    Gen(GenArgs),
    /// Run one configuration from a JSON run file.
    Run(RunArgs),
    /// Run a preset or a JSON experiment spec with repeats.
    Sweep(SweepArgs),
    /// Monte-Carlo estimate of the restricted isometry constant.
    Rip(RipArgs),
    /// Train a quadratic-activation network with Algorithm 1 or SGD.
    Quadnet(QuadArgs),
    /// Re-render the chart of a sweep output directory.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    Spec,
    Experiment,
}

impl From<TruthArg> for TruthMode {
    fn from(t: TruthArg) -> Self {
        match t {
            TruthArg::Spec => TruthMode::Spec,
            TruthArg::Experiment => TruthMode::Experiment,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub r: usize,
    /// Number of sensing matrices (or examples with `--quad`).
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, value_enum, default_value_t = TruthArg::Experiment)]
    pub truth: TruthArg,
    /// Emit a quadratic-network dataset instead of a sensing ensemble.
    #[arg(long)]
    pub quad: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the run file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub desk_scale: bool,
    /// Overrides `seed_base`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (default `out/<name>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Args)]
pub struct RipArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 500)]
    pub probes: usize,
    /// Truncated power iterations on the most extreme probes.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Symmetric)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RescaleArg {
    Verbatim,
    Matched,
    Off,
}

#[derive(Debug, Args)]
pub struct QuadArgs {
    /// JSON run file; its run must be `algorithm1` or `quad_sgd`.
    #[arg(long, conflicts_with_all = ["d", "r", "n"])]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub d: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    pub r: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eta: f64,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = RescaleArg::Verbatim)]
    pub rescale: RescaleArg,
    /// Estimate τ from the labels instead of using the planted value.
    #[arg(long)]
    pub estimate_tau: bool,
    #[arg(long)]
    pub rcut: Option<f64>,
    #[arg(long)]
    pub no_truncation: bool,
    /// Use minibatch SGD with this batch size instead of full batches.
    #[arg(long)]
    pub sgd_batch: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep output directory holding summary.csv and curves.csv.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave out checkpoints before this iteration.
    #[arg(long)]
    pub skip_initial: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
}

/// A single run: one cell with an explicit seed. The ground truth is drawn
/// from `truth_seed` (default `seed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub truth_seed: Option<u64>,
    pub cell: Cell,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| XlabError::io(path, e))?;
        let file: RunFile = serde_json::from_str(&text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(XlabError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        file.cell.validate()?;
        Ok(file)
    }
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    label: &'a str,
    status: &'a sensing_core::solvers::RunStatus,
    iterations: usize,
    final_train_error: Option<f64>,
    final_test_error: f64,
    csv: String,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| XlabError::io(dir, e))
}

fn finish_run(label: &str, traj: &Trajectory, out: &Path) -> Result<()> {
    create_dir(out)?;
    let path = out.join(format!("{label}.csv"));
    fs::write(&path, traj.csv_string()).map_err(|e| XlabError::io(&path, e))?;
    let report = RunReport {
        label,
        status: &traj.status,
        iterations: traj.last().t,
        final_train_error: traj.final_train_error(),
        final_test_error: traj.final_test_error(),
        csv: path.display().to_string(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    match traj.status.error() {
        Some(e) => Err(XlabError::Aborted(e.to_string())),
        None => Ok(()),
    }
}

fn write_binary(path: PathBuf, body: impl FnOnce(&mut BufWriter<fs::File>) -> sensing_core::Result<()>) -> Result<PathBuf> {
    let f = fs::File::create(&path).map_err(|e| XlabError::io(&path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w)?;
    std::io::Write::flush(&mut w).map_err(|e| XlabError::io(&path, e))?;
    Ok(path)
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let gt = sample_ground_truth(a.d, a.r, a.kappa, a.truth.into(), a.seed)?;
    create_dir(&a.out)?;
    let gt_path = write_binary(a.out.join("ground_truth.bin"), |w| container::write_ground_truth(w, &gt))?;
    let data_path = if a.quad {
        let data = quadnet::gen_quad_data(&gt, a.m, a.seed)?;
        write_binary(a.out.join("quad_data.bin"), |w| container::write_quad_dataset(w, &data))?
    } else {
        let ens = sample_gaussian_ensemble(&gt, a.m, a.seed)?;
        write_binary(a.out.join("ensemble.bin"), |w| container::write_ensemble(w, &ens))?
    };
    println!(
        "{}",
        serde_json::json!({ "ground_truth": gt_path.display().to_string(), "data": data_path.display().to_string() })
    );
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let file = RunFile::load(&a.config)?;
    let seed = a.seed.unwrap_or(file.seed);
    let truth_seed = file.truth_seed.unwrap_or(seed);
    let cell = &file.cell;
    let gt = sample_ground_truth(cell.d, cell.r, 1.0, TruthMode::Experiment, truth_seed)?;
    let traj = run_cell(&gt, cell, seed)?;
    finish_run(&cell.label, &traj, &a.out)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut spec = match (&a.config, a.preset) {
        (Some(path), _) => ExperimentSpec::load(path)?,
        (None, Some(p)) => crate::presets::preset(p, a.desk_scale)?,
        (None, None) => return Err(XlabError::Config("sweep needs --preset or --config".into())),
    };
    if let (Some(_), Some(p)) = (&a.config, a.preset) {
        if p != spec.preset {
            return Err(XlabError::Config(format!("--preset {p:?} disagrees with the config")));
        }
    }
    if let Some(seed) = a.seed {
        spec.seed_base = seed;
    }
    if let Some(k) = a.repeats {
        spec.repeats = k;
    }
    spec.validate()?;
    let out = a.out.unwrap_or_else(|| PathBuf::from("out").join(&spec.name));
    let outcome = run_experiment(&spec, a.threads)?;
    write_outputs(&outcome, &out)?;
    print!("{}", outcome.summary.summary_csv());
    eprintln!("wrote {}", out.display());
    match outcome.first_abort() {
        Some(msg) => Err(XlabError::Aborted(msg)),
        None => Ok(()),
    }
}

fn cmd_rip(a: RipArgs) -> Result<()> {
    let gt = sample_ground_truth(a.d, a.r, 1.0, TruthMode::Spec, a.seed)?;
    let ens = sample_gaussian_ensemble(&gt, a.m, a.seed)?;
    let opts = RipOptions {
        rank: a.r,
        n_probes: a.probes,
        seed: a.seed,
        kind: match a.kind {
            KindArg::Symmetric => ProbeKind::Symmetric,
            KindArg::Asymmetric => ProbeKind::Asymmetric,
        },
        refine_steps: a.refine,
    };
    let report = ripcheck::estimate_rip_with(&ens, &opts)?;
    let json = serde_json::to_string_pretty(&report)?;
    match a.out {
        Some(path) => fs::write(&path, json + "\n").map_err(|e| XlabError::io(&path, e))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_quadnet(a: QuadArgs) -> Result<()> {
    let (file, seed) = match &a.config {
        Some(path) => {
            let file = RunFile::load(path)?;
            if !matches!(file.cell.run, RunConfig::Algorithm1(_) | RunConfig::QuadSgd(_)) {
                return Err(XlabError::Config("quadnet needs an algorithm1 or quad_sgd run".into()));
            }
            let seed = a.seed.unwrap_or(file.seed);
            (file, seed)
        }
        None => {
            let seed = a.seed.unwrap_or(0);
            let mut cfg = QuadConfig::new(a.alpha, a.eta, a.iterations);
            cfg.record_every = a.record_every;
            cfg.rcut = a.rcut;
            cfg.truncate = !a.no_truncation;
            cfg.tau_mode = if a.estimate_tau { TauMode::Estimated } else { TauMode::Exact };
            cfg.rescale = match a.rescale {
                RescaleArg::Verbatim => Rescale::Verbatim,
                RescaleArg::Matched => Rescale::Matched,
                RescaleArg::Off => Rescale::Off,
            };
            cfg.batch = a.sgd_batch;
            let run = if a.sgd_batch.is_some() {
                RunConfig::QuadSgd(cfg)
            } else {
                RunConfig::Algorithm1(cfg)
            };
            let cell = Cell {
                label: "quadnet".into(),
                d: a.d.unwrap_or_default(),
                r: a.r.unwrap_or_default(),
                samples: a.n.unwrap_or_default(),
                run,
                probes: false,
                series: None,
                x: None,
            };
            cell.validate()?;
            let file = RunFile {
                schema_version: SCHEMA_VERSION,
                seed,
                truth_seed: None,
                cell,
            };
            (file, seed)
        }
    };
    check_label(&file.cell.label)?;
    let gt = sample_ground_truth(
        file.cell.d,
        file.cell.r,
        1.0,
        TruthMode::Experiment,
        file.truth_seed.unwrap_or(seed),
    )?;
    let traj = run_cell(&gt, &file.cell, seed)?;
    finish_run(&file.cell.label, &traj, &a.out)
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let table = SummaryTable::load_dir(&a.input)?;
    let spec_path = a.input.join("spec.json");
    let (mut chart_spec, name) = if spec_path.exists() {
        let spec = ExperimentSpec::load(&spec_path)?;
        (spec.chart, spec.name)
    } else {
        (Default::default(), "chart".to_string())
    };
    if let Some(skip) = a.skip_initial {
        chart_spec.skip_initial = skip;
    }
    if let Some(metric) = a.metric {
        chart_spec.metric = metric;
    }
    let svg = chart::render_summary(&table, &chart_spec)?;
    let out = a.out.unwrap_or_else(|| a.input.join(format!("{name}.svg")));
    fs::write(&out, svg).map_err(|e| XlabError::io(&out, e))?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Rip(a) => cmd_rip(a),
        Command::Quadnet(a) => cmd_quadnet(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
