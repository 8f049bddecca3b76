use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sensing_core::container;
use sensing_core::solvers::{RunConfig, SolverConfig};
use sensing_xlab::config::{Cell, ChartSpec, ExperimentSpec, Preset, SCHEMA_VERSION};
use sensing_xlab::summary::SummaryTable;

fn xlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlab")).args(args).output().unwrap()
}

fn gd(label: &str, alpha: f64, eta: f64, iterations: usize) -> Cell {
    let mut cfg = SolverConfig::new(alpha, eta, iterations);
    cfg.record_every = 10;
    Cell {
        label: label.into(),
        d: 6,
        r: 1,
        samples: 60,
        run: RunConfig::Gd(cfg),
        probes: false,
        series: None,
        x: None,
    }
}

fn tiny_spec() -> ExperimentSpec {
    ExperimentSpec {
        schema_version: SCHEMA_VERSION,
        name: "tiny".into(),
        preset: Preset::Custom,
        desk_scale: false,
        repeats: 3,
        seed_base: 11,
        cells: vec![gd("small", 1e-3, 0.02, 60), gd("large", 0.5, 0.02, 60)],
        chart: ChartSpec::default(),
    }
}

fn write_spec(dir: &Path, spec: &ExperimentSpec) -> String {
    let path = dir.join("spec_in.json");
    fs::write(&path, spec.to_json()).unwrap();
    path.display().to_string()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn missing_config_exits_with_one() {
    let out = xlab(&["run", "--config", "definitely-missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("definitely-missing.json"));
}

#[test]
fn unknown_flag_and_unknown_key_exit_with_one() {
    assert_eq!(xlab(&["sweep", "--frobnicate"]).status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&tiny_spec().to_json()).unwrap();
    v["extra"] = serde_json::json!(1);
    let path = tmp.path().join("bad.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = xlab(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_spec(tmp.path(), &tiny_spec());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for (dir, threads) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let out = xlab(&["sweep", "--config", &cfg, "--threads", threads, "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let reference = dir_bytes(&a);
    assert_eq!(reference.len(), 1 + 6 + 3);
    assert_eq!(dir_bytes(&b), reference);
    assert_eq!(dir_bytes(&c), reference);
}

#[test]
fn summary_means_recompute_from_run_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_spec(tmp.path(), &tiny_spec());
    let out_dir = tmp.path().join("out");
    let out = xlab(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let table = SummaryTable::load_dir(&out_dir).unwrap();
    let echo = ExperimentSpec::load(&out_dir.join("spec.json")).unwrap();
    assert_eq!(echo, tiny_spec());
    for row in &table.rows {
        let finals: Vec<(f64, f64)> = (0..3)
            .map(|k| {
                let text = fs::read_to_string(out_dir.join("runs").join(format!("{}_rep{k}.csv", row.label))).unwrap();
                let last = text.lines().last().unwrap().split(',').map(str::to_owned).collect::<Vec<_>>();
                (last[1].parse().unwrap(), last[2].parse().unwrap())
            })
            .collect();
        let train = finals.iter().map(|f| f.0).sum::<f64>() / 3.0;
        let test = finals.iter().map(|f| f.1).sum::<f64>() / 3.0;
        assert!((row.final_train.unwrap().mean - train).abs() <= 1e-12);
        assert!((row.final_test.unwrap().mean - test).abs() <= 1e-12);
        assert_eq!((row.repeats, row.completed), (3, 3));
    }
}

#[test]
fn plot_rerenders_with_skip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_spec(tmp.path(), &tiny_spec());
    let out_dir = tmp.path().join("out");
    assert_eq!(xlab(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()]).status.code(), Some(0));
    let original = fs::read_to_string(out_dir.join("tiny.svg")).unwrap();
    let replot = tmp.path().join("replot.svg");
    let out = xlab(&["plot", "--input", out_dir.to_str().unwrap(), "--out", replot.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&replot).unwrap(), original);
    let skipped = tmp.path().join("skipped.svg");
    let out = xlab(&[
        "plot",
        "--input",
        out_dir.to_str().unwrap(),
        "--out",
        skipped.to_str().unwrap(),
        "--skip-initial",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let count = |s: &str| s.matches("class=\"marker\"").count();
    assert!(count(&fs::read_to_string(&skipped).unwrap()) < count(&original));
    assert_eq!(xlab(&["plot", "--input", tmp.path().join("nope").to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn divergent_run_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let file = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "seed": 1,
        "cell": gd("boom", 1.0, 50.0, 200),
    });
    let path = tmp.path().join("run.json");
    fs::write(&path, file.to_string()).unwrap();
    let out = xlab(&["run", "--config", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"]["status"], "diverged");
    assert!(tmp.path().join("boom.csv").exists());
}

#[test]
fn run_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let file = serde_json::json!({ "schema_version": 1, "seed": 4, "cell": gd("ok", 1e-3, 0.02, 50) });
    let path = tmp.path().join("run.json");
    fs::write(&path, file.to_string()).unwrap();
    let a = xlab(&["run", "--config", path.to_str().unwrap(), "--out", tmp.path().join("a").to_str().unwrap()]);
    let b = xlab(&["run", "--config", path.to_str().unwrap(), "--out", tmp.path().join("b").to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        fs::read(tmp.path().join("a/ok.csv")).unwrap(),
        fs::read(tmp.path().join("b/ok.csv")).unwrap()
    );
}

#[test]
fn rip_report_at_large_m() {
    let out = xlab(&["rip", "--d", "30", "--r", "2", "--m", "6000", "--probes", "500", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["delta_hat"].as_f64().unwrap() < 0.35);
    assert_eq!(report["samples"], 500);
}

#[test]
fn gen_writes_readable_containers() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = xlab(&["gen", "--d", "5", "--r", "2", "--m", "40", "--seed", "3", "--out", dir]);
    assert_eq!(out.status.code(), Some(0));
    let gt = container::read_ground_truth(&mut fs::File::open(tmp.path().join("ground_truth.bin")).unwrap()).unwrap();
    let ens = container::read_ensemble(&mut fs::File::open(tmp.path().join("ensemble.bin")).unwrap()).unwrap();
    assert_eq!((gt.d, ens.m()), (5, 40));
    let out = xlab(&["gen", "--d", "5", "--r", "2", "--m", "40", "--quad", "--out", dir]);
    assert_eq!(out.status.code(), Some(0));
    let data = container::read_quad_dataset(&mut fs::File::open(tmp.path().join("quad_data.bin")).unwrap()).unwrap();
    assert_eq!(data.n(), 40);
    assert_eq!(xlab(&["gen", "--d", "2", "--r", "3", "--m", "4", "--out", dir]).status.code(), Some(1));
}

#[test]
fn quadnet_flags_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = xlab(&[
        "quadnet", "--d", "8", "--r", "1", "--n", "200", "--iterations", "300", "--eta", "2e-3", "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["final_test_error"].as_f64().unwrap() < 1.0);
    let csv = fs::read_to_string(tmp.path().join("quadnet.csv")).unwrap();
    assert!(csv.starts_with("t,train_error,test_error,population_risk"));
    assert_eq!(xlab(&["quadnet", "--d", "8"]).status.code(), Some(1));
}
