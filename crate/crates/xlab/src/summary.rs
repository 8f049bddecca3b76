//! Per-cell aggregates over repeats and their CSV form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sensing_core::solvers::RunStatus;

use crate::config::ExperimentSpec;
use crate::runner::RunRecord;
use crate::{Result, XlabError};

pub const SUMMARY_HEADER: &str = "label,series,x,repeats,completed,aborted,failed,train_mean,train_std,test_mean,test_std";
pub const CURVES_HEADER: &str = "label,t,count,train_mean,train_std,test_mean,test_std";

/// Arithmetic mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            std,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub series: Option<String>,
    pub x: Option<f64>,
    pub repeats: usize,
    /// Runs that finished (including early stops).
    pub completed: usize,
    /// Runs stopped by divergence or a degenerate rescale.
    pub aborted: usize,
    /// Runs that returned an error.
    pub failed: usize,
    pub final_train: Option<Stat>,
    pub final_test: Option<Stat>,
}

impl SummaryRow {
    pub fn is_incomplete(&self) -> bool {
        self.completed < self.repeats
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub train: Option<Stat>,
    pub test: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub curves: Vec<Curve>,
}

fn finished(status: &RunStatus) -> bool {
    matches!(status, RunStatus::Completed | RunStatus::EarlyStopped { .. })
}

impl SummaryTable {
    /// Aggregates finished runs only; aborted and failed runs are counted
    /// and mark their cell incomplete.
    pub fn from_runs(spec: &ExperimentSpec, runs: &[RunRecord]) -> Self {
        let mut rows = Vec::with_capacity(spec.cells.len());
        let mut curves = Vec::with_capacity(spec.cells.len());
        for (c, cell) in spec.cells.iter().enumerate() {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.cell == c).collect();
            let done: Vec<_> = mine
                .iter()
                .filter_map(|r| r.trajectory())
                .filter(|t| finished(&t.status))
                .collect();
            let aborted = mine
                .iter()
                .filter_map(|r| r.trajectory())
                .filter(|t| !finished(&t.status))
                .count();
            let failed = mine.iter().filter(|r| r.outcome.is_err()).count();
            let trains: Vec<f64> = done.iter().filter_map(|t| t.final_train_error()).collect();
            let tests: Vec<f64> = done.iter().map(|t| t.final_test_error()).collect();
            rows.push(SummaryRow {
                label: cell.label.clone(),
                series: cell.series.clone(),
                x: cell.x,
                repeats: spec.repeats,
                completed: done.len(),
                aborted,
                failed,
                final_train: if trains.len() == done.len() { Stat::of(&trains) } else { None },
                final_test: Stat::of(&tests),
            });
            let mut by_t: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for t in &done {
                for cp in &t.checkpoints {
                    let e = by_t.entry(cp.t).or_default();
                    e.1.push(cp.test_error);
                    if let Some(tr) = cp.train_error {
                        e.0.push(tr);
                    }
                }
            }
            let points = by_t
                .into_iter()
                .filter_map(|(t, (train, test))| {
                    let test = Stat::of(&test)?;
                    let train = if train.len() == test.count { Stat::of(&train) } else { None };
                    Some(CurvePoint { t, train, test })
                })
                .collect();
            curves.push(Curve {
                label: cell.label.clone(),
                points,
            });
        }
        SummaryTable { rows, curves }
    }

    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn curve(&self, label: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label == label)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.label,
                r.series.as_deref().unwrap_or(""),
                fmt_opt(r.x),
                r.repeats,
                r.completed,
                r.aborted,
                r.failed,
                fmt_stat(r.final_train),
                fmt_stat(r.final_test),
            ));
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from(CURVES_HEADER);
        out.push('\n');
        for c in &self.curves {
            for p in &c.points {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.label,
                    p.t,
                    p.test.count,
                    fmt_stat(p.train),
                    fmt_stat(Some(p.test)),
                ));
            }
        }
        out
    }

    /// Reads back the `summary.csv` and `curves.csv` of an output directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let summary_path = dir.join("summary.csv");
        let curves_path = dir.join("curves.csv");
        let summary = read(&summary_path)?;
        let curves = read(&curves_path)?;
        let rows = parse_rows(&summary_path, &summary, SUMMARY_HEADER, 11)?
            .into_iter()
            .map(|(line, f)| parse_summary_row(&summary_path, line, &f))
            .collect::<Result<Vec<_>>>()?;
        let mut out: Vec<Curve> = Vec::new();
        for (line, f) in parse_rows(&curves_path, &curves, CURVES_HEADER, 7)? {
            let bad = |what: &str| table_error(&curves_path, line, what);
            let t = f[1].parse().map_err(|_| bad("t"))?;
            let count = f[2].parse().map_err(|_| bad("count"))?;
            let train = parse_stat(&f[3], &f[4], count).map_err(|_| bad("train"))?;
            let test = parse_stat(&f[5], &f[6], count)
                .map_err(|_| bad("test"))?
                .ok_or_else(|| bad("test"))?;
            let point = CurvePoint { t, train, test };
            match out.last_mut() {
                Some(c) if c.label == f[0] => c.points.push(point),
                _ => out.push(Curve {
                    label: f[0].clone(),
                    points: vec![point],
                }),
            }
        }
        Ok(SummaryTable { rows, curves: out })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn fmt_stat(s: Option<Stat>) -> String {
    match s {
        Some(s) => format!("{:e},{:e}", s.mean, s.std),
        None => ",".into(),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| XlabError::io(path, e))
}

fn table_error(path: &Path, line: usize, reason: &str) -> XlabError {
    XlabError::Table {
        path: path.to_path_buf(),
        reason: format!("line {line}: bad {reason}"),
    }
}

fn parse_rows(path: &Path, text: &str, header: &str, width: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(XlabError::Table {
            path: path.to_path_buf(),
            reason: "unexpected header".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let fields: Vec<String> = l.split(',').map(str::to_owned).collect();
            if fields.len() == width {
                Ok((i + 2, fields))
            } else {
                Err(table_error(path, i + 2, "field count"))
            }
        })
        .collect()
}

fn parse_f64_opt(s: &str) -> std::result::Result<Option<f64>, ()> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| ())
    }
}

fn parse_stat(mean: &str, std: &str, count: usize) -> std::result::Result<Option<Stat>, ()> {
    match (parse_f64_opt(mean)?, parse_f64_opt(std)?) {
        (Some(mean), Some(std)) => Ok(Some(Stat { mean, std, count })),
        (None, None) => Ok(None),
        _ => Err(()),
    }
}

fn parse_summary_row(path: &Path, line: usize, f: &[String]) -> Result<SummaryRow> {
    let bad = |what: &str| table_error(path, line, what);
    let num = |i: usize, what: &str| f[i].parse::<usize>().map_err(|_| bad(what));
    let completed = num(4, "completed")?;
    Ok(SummaryRow {
        label: f[0].clone(),
        series: if f[1].is_empty() { None } else { Some(f[1].clone()) },
        x: parse_f64_opt(&f[2]).map_err(|_| bad("x"))?,
        repeats: num(3, "repeats")?,
        completed,
        aborted: num(5, "aborted")?,
        failed: num(6, "failed")?,
        final_train: parse_stat(&f[7], &f[8], completed).map_err(|_| bad("train"))?,
        final_test: parse_stat(&f[9], &f[10], completed).map_err(|_| bad("test"))?,
    })
}
