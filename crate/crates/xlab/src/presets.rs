//! The five experiment figures as ready-made sweeps.
//!
//! Full scale runs `d = 100`, and figure 4 at `d ∈ {100, 150}`. Desk scale
//! maps `d = 100` to `d = 50` and runs figure 4 at `d ∈ {40, 60}`; every
//! other parameter is kept.

use sensing_core::quadnet::{QuadConfig, Rescale};
use sensing_core::solvers::{RunConfig, SolverConfig};

use crate::config::{Cell, ChartKind, ChartSpec, ExperimentSpec, Metric, Preset, SCHEMA_VERSION};
use crate::{Result, XlabError};

pub const STEP: f64 = 0.0025;
pub const RANK: usize = 5;
pub const ALPHA_GRID: [f64; 4] = [1.0, 1e-1, 1e-2, 1e-3];
pub const REPEATS: usize = 3;
/// Quadratic-network SGD step in the sensing convention.
pub const FIG5_STEP: f64 = 8e-5;
pub const FIG5_ITERATIONS: usize = 4_000_000;

fn big_d(desk: bool) -> usize {
    if desk {
        50
    } else {
        100
    }
}

/// `1e0`, `1e-1`, ... as used in cell labels.
pub fn alpha_label(alpha: f64) -> String {
    format!("alpha_{alpha:e}")
}

fn gd_cell(label: String, d: usize, r: usize, m: usize, cfg: SolverConfig) -> Cell {
    Cell {
        label,
        d,
        r,
        samples: m,
        run: RunConfig::Gd(cfg),
        probes: false,
        series: None,
        x: None,
    }
}

fn spec(name: &str, preset: Preset, desk: bool, cells: Vec<Cell>, chart: ChartSpec) -> ExperimentSpec {
    ExperimentSpec {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        preset,
        desk_scale: desk,
        repeats: REPEATS,
        seed_base: 1,
        cells,
        chart,
    }
}

fn alpha_sweep(alphas: &[f64], d: usize, iterations: usize, record_every: usize) -> Vec<Cell> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut cfg = SolverConfig::new(alpha, STEP, iterations);
            cfg.record_every = record_every;
            gd_cell(alpha_label(alpha), d, RANK, 5 * d * RANK, cfg)
        })
        .collect()
}

/// Initialization scale sweep, `10^4` steps.
pub fn fig1(desk: bool) -> ExperimentSpec {
    let d = big_d(desk);
    let chart = ChartSpec {
        metric: Metric::Both,
        title: Some("train and test error by initialization scale".into()),
        ..ChartSpec::default()
    };
    spec("fig1", Preset::Fig1, desk, alpha_sweep(&ALPHA_GRID, d, 10_000, 100), chart)
}

/// Large against small initialization over a longer horizon.
pub fn fig2(desk: bool) -> ExperimentSpec {
    let d = big_d(desk);
    let chart = ChartSpec {
        metric: Metric::Both,
        title: Some("large versus small initialization".into()),
        ..ChartSpec::default()
    };
    spec("fig2", Preset::Fig2, desk, alpha_sweep(&[1.0, 1e-3], d, 50_000, 500), chart)
}

/// `U_0 = 0.01 I` for `10^5` steps.
pub fn fig3(desk: bool) -> ExperimentSpec {
    let d = big_d(desk);
    let chart = ChartSpec {
        title: Some("test error over a long run".into()),
        ..ChartSpec::default()
    };
    spec("fig3", Preset::Fig3, desk, alpha_sweep(&[1e-2], d, 100_000, 1_000), chart)
}

pub const FIG4_RATIOS: [usize; 7] = [5, 10, 15, 20, 25, 30, 35];
pub const FIG4_ALPHA: f64 = 1e-3;

/// Rank-1 recovery by factorized GD and PGD as `m/d` grows.
pub fn fig4(desk: bool) -> ExperimentSpec {
    let dims: [usize; 2] = if desk { [40, 60] } else { [100, 150] };
    let mut cells = Vec::new();
    for d in dims {
        for ratio in FIG4_RATIOS {
            let mut cfg = SolverConfig::new(FIG4_ALPHA, STEP, 10_000);
            cfg.stop_train_error = Some(1e-3);
            for (tag, run) in [
                ("gd", RunConfig::Gd(cfg.clone())),
                (
                    "pgd",
                    RunConfig::Pgd {
                        config: cfg.clone(),
                        x0_given: false,
                    },
                ),
            ] {
                cells.push(Cell {
                    label: format!("{tag}_d{d}_m{ratio}d"),
                    d,
                    r: 1,
                    samples: ratio * d,
                    run,
                    probes: false,
                    series: Some(format!("{tag}_d{d}")),
                    x: Some(ratio as f64),
                });
            }
        }
    }
    let chart = ChartSpec {
        kind: ChartKind::Final,
        title: Some("final test error against m/d".into()),
        ..ChartSpec::default()
    };
    spec("fig4", Preset::Fig4, desk, cells, chart)
}

/// The quadratic-network config of the fig5 preset: identity initialization,
/// one example per step, no truncation and no rescale. The step is given
/// in the sensing convention and divided by the factor 4 of `∇f̃`.
pub fn fig5_config(iterations: usize) -> QuadConfig {
    let mut cfg = QuadConfig::new(1.0, FIG5_STEP / 4.0, iterations);
    cfg.truncate = false;
    cfg.rescale = Rescale::Off;
    cfg.batch = Some(1);
    cfg.record_every = (iterations / 40).max(1);
    cfg
}

pub fn fig5(desk: bool) -> ExperimentSpec {
    let d = big_d(desk);
    let cell = Cell {
        label: "sgd_identity".into(),
        d,
        r: RANK,
        samples: 5 * d * RANK,
        run: RunConfig::QuadSgd(fig5_config(FIG5_ITERATIONS)),
        probes: false,
        series: None,
        x: None,
    };
    let chart = ChartSpec {
        metric: Metric::Both,
        title: Some("quadratic network, SGD from the identity".into()),
        ..ChartSpec::default()
    };
    spec("fig5", Preset::Fig5, desk, vec![cell], chart)
}

pub fn preset(p: Preset, desk: bool) -> Result<ExperimentSpec> {
    Ok(match p {
        Preset::Fig1 => fig1(desk),
        Preset::Fig2 => fig2(desk),
        Preset::Fig3 => fig3(desk),
        Preset::Fig4 => fig4(desk),
        Preset::Fig5 => fig5(desk),
        Preset::Custom => {
            return Err(XlabError::Config("the custom preset needs --config".into()));
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_full_scale_echo() {
        let s = fig1(false);
        s.validate().unwrap();
        assert_eq!(s.cells.len(), 4);
        for (cell, alpha) in s.cells.iter().zip(ALPHA_GRID) {
            assert_eq!((cell.d, cell.r, cell.samples), (100, 5, 2500));
            let RunConfig::Gd(cfg) = &cell.run else { panic!("gd cell") };
            assert_eq!((cfg.alpha, cfg.eta, cfg.iterations), (alpha, 0.0025, 10_000));
        }
        assert_eq!(s.repeats, 3);
    }

    #[test]
    fn desk_scale_maps_dimension() {
        for p in [Preset::Fig1, Preset::Fig2, Preset::Fig3, Preset::Fig5] {
            let s = preset(p, true).unwrap();
            s.validate().unwrap();
            assert!(s.cells.iter().all(|c| c.d == 50 && c.samples == 1250));
        }
        let s = fig4(true);
        s.validate().unwrap();
        let mut dims: Vec<usize> = s.cells.iter().map(|c| c.d).collect();
        dims.dedup();
        assert_eq!(dims, vec![40, 60]);
        assert!(s.cells.iter().all(|c| c.samples == c.x.unwrap() as usize * c.d));
        assert!(preset(Preset::Custom, true).is_err());
    }

    #[test]
    fn fig5_step_absorbs_gradient_factor() {
        let cfg = fig5_config(100);
        assert_eq!(4.0 * cfg.eta, FIG5_STEP);
        assert_eq!(cfg.effective_rcut(50), f64::INFINITY);
    }
}
