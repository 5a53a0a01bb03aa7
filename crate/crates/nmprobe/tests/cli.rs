use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nmprobe::core::measures::{fit_concurrence_decay, non_markovianity, ConcurrenceSeries};
use nmprobe::core::tomography::{expectations_from_counts, MeasurementRecord, TomographySetting};
use nmprobe::{RunError, RunReport};
use serde_json::json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nmprobe"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs")
}

fn write_config(dir: &Path, v: serde_json::Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn report(dir: &Path) -> RunReport {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn success_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("free_decay.json");
    let (code, text) = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(out.join("trajectory.csv").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = [
        json!({"scenario": {"name": "revival"}}),
        json!({"scenario": {"name": "revival", "gamma": 1.0, "a_in": 0.1}}),
        json!({"scenario": {"name": "free_decay", "duraton": 3.0}}),
        json!({"scenario": {"name": "no_such"}}),
        json!({"scenario": {"name": "free_decay"}, "integrator": {"step": -0.001}}),
        json!({"scenario": {"name": "revival", "gamma": 1.0}, "integrator": {"step": 0.5, "record_every": 1}}),
        json!({"scenario": {"name": "free_decay"}, "readout": {"fidelity_a": 1.2, "fidelity_b": 0.9}}),
    ];
    for v in bad {
        let cfg = write_config(tmp.path(), v.clone());
        let (code, text) = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 2, "{v}: {text}");
    }
    let cfg = write_config(tmp.path(), json!({"scenario": {"name": "free_decay"}}));
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(run_cli(&["run", "--config", c, "--out", o, "--set", "scenario.duration=-1"]).0, 2);
    assert_eq!(run_cli(&["run", "--config", c, "--out", o, "--jobs", "0"]).0, 2);
    assert_eq!(run_cli(&["sweep", "--config", c, "--out", o, "--axis", "bogus", "--values", "1"]).0, 2);
    assert_eq!(run_cli(&["run", "--config", "/nonexistent/config.json", "--out", o]).0, 1);
}

#[test]
fn numerical_failures_map_to_exit_three() {
    let e: RunError = nmprobe::core::Error::Numerical {
        time: 1.0,
        min_eigenvalue: -1e-3,
        trace: 1.0,
    }
    .into();
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        json!({"scenario": {"name": "revival", "gamma": 1.0, "duration": 3.0},
               "measurement": {"mode": "tomography", "shots": 500, "resamples": 2}, "seed": 11}),
    );
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for (d, jobs) in dirs.iter().zip(["1", "4"]) {
        let (code, text) = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--jobs", jobs]);
        assert_eq!(code, 0, "{text}");
    }
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
    let (code, _) = run_cli(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("c").to_str().unwrap(), "--seed", "12",
    ]);
    assert_eq!(code, 0);
    assert_ne!(
        fs::read(dirs[0].join("trajectory.csv")).unwrap(),
        fs::read(tmp.path().join("c/trajectory.csv")).unwrap()
    );
}

#[test]
fn scalars_recompute_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("revival.json");
    assert_eq!(run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 0);
    let rep = report(&out);
    let (h, rows) = read_csv(&out.join("trajectory.csv"));
    let series = ConcurrenceSeries::new(col(&h, &rows, "time_us"), col(&h, &rows, "concurrence")).unwrap();
    let n = non_markovianity(&series).unwrap();
    assert!((n - rep.scalars["n_measure"]).abs() < 1e-9, "{n} vs {}", rep.scalars["n_measure"]);
    let fit = fit_concurrence_decay(&series, 0.0, 10.0).unwrap();
    assert!((fit.rate - rep.scalars["gamma_c"]).abs() < 1e-9);
    assert!((fit.residual - rep.scalars["fit_residual"]).abs() < 1e-9);
    assert_eq!(fit.points as f64, rep.scalars["fit_points"]);
}

#[test]
fn empty_sweep_writes_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("revival.json");
    let (code, text) = run_cli(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--axis", "gamma", "--values", "",
    ]);
    assert_eq!(code, 0, "{text}");
    let (h, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(h, ["axis_value", "n_measure", "gamma_c", "residual"]);
    assert!(rows.is_empty());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 0);
}

#[test]
fn a_in_sweep_converts_to_gamma() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), json!({"scenario": {"name": "revival", "gamma": 0.0, "duration": 2.0}}));
    let (code, text) = run_cli(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--axis", "a_in", "--values", "0.1,0.2",
    ]);
    assert_eq!(code, 0, "{text}");
    for (k, a) in [0.1f64, 0.2].iter().enumerate() {
        let rep = report(&out.join(format!("a_in_{k:03}")));
        let expect = 1.84 * a * a.sqrt();
        assert!((rep.scalars["gamma"] - expect).abs() < 1e-12, "{} vs {expect}", rep.scalars["gamma"]);
    }
    let (_, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.1);
}

#[test]
fn records_json_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("bell_prep.json");
    assert_eq!(run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 0);
    let text = fs::read_to_string(out.join("records.json")).unwrap();
    let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    let first = &raw[0];
    assert_eq!(first["setting"], json!(["Ry90", "Ry90"]));
    assert_eq!(first["counts"].as_array().unwrap().len(), 4);
    let records: Vec<MeasurementRecord> = serde_json::from_str(&text).unwrap();
    assert_eq!(records.len(), 9);
    for (r, s) in records.iter().zip(TomographySetting::ALL) {
        assert_eq!(r.setting, s);
        assert_eq!(r.counts.iter().sum::<u64>(), 5000);
    }
    let e = expectations_from_counts(&records).unwrap();
    assert_eq!(e[0], 1.0);
}
