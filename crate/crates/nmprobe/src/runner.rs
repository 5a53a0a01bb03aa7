//! Writes scenario outputs and drives single runs and axis sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nmprobe_core::model::dephasing_from_noise_amplitude;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{apply_override, set_path, RunConfig};
use crate::error::{RunError, RunResult};
use crate::scenario::{run_scenario, ScenarioOutput, SweepRow, Table, SWEEP_HEADER};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub scalars: BTreeMap<String, f64>,
    /// Files written to the output directory, including `summary.json`.
    pub files: Vec<String>,
    pub config: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub axis_value: f64,
    pub n_measure: f64,
    pub gamma_c: Option<f64>,
    pub residual: Option<f64>,
}

impl From<&SweepRow> for SweepEntry {
    fn from(r: &SweepRow) -> Self {
        Self {
            axis_value: r.axis_value,
            n_measure: r.n_measure,
            gamma_c: r.gamma_c,
            residual: r.residual,
        }
    }
}

/// Command-line adjustments applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Switches to tomography mode with this many shots per setting.
    pub shots: Option<u64>,
    /// `key=value` pairs on dotted paths.
    pub set: Vec<String>,
}

impl Overrides {
    pub fn apply(&self, v: &mut Value) -> RunResult<()> {
        if let Some(seed) = self.seed {
            set_path(v, "seed", Value::from(seed))?;
        }
        if let Some(shots) = self.shots {
            set_path(v, "measurement.mode", Value::from("tomography"))?;
            set_path(v, "measurement.shots", Value::from(shots))?;
        }
        for s in &self.set {
            apply_override(v, s)?;
        }
        Ok(())
    }
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x}")
    }
}

fn write_table(dir: &Path, table: &Table) -> RunResult<()> {
    let path = dir.join(&table.file);
    let csv_err = |source| RunError::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| fmt_value(*x))).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RunError::io(&path, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(v).expect("serialisable");
    text.push('\n');
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

/// Writes every table and document plus `summary.json`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, out: &ScenarioOutput) -> RunResult<RunReport> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let mut files = Vec::new();
    for t in &out.tables {
        write_table(dir, t)?;
        files.push(t.file.clone());
    }
    for (name, doc) in &out.documents {
        write_json(&dir.join(name), doc)?;
        files.push(name.clone());
    }
    files.push("summary.json".to_string());
    let report = RunReport {
        scenario: cfg.scenario.name().to_string(),
        seed: cfg.seed,
        scalars: out.scalars.clone(),
        files,
        config: cfg.to_value(),
        sweep: out.sweep.iter().map(SweepEntry::from).collect(),
    };
    write_json(&dir.join("summary.json"), &report)?;
    Ok(report)
}

/// Parses, overrides, validates, runs and writes one scenario.
pub fn run(mut config: Value, overrides: &Overrides, out_dir: &Path) -> RunResult<RunReport> {
    overrides.apply(&mut config)?;
    let cfg = RunConfig::from_value(config)?;
    let out = run_scenario(&cfg)?;
    write_outputs(out_dir, &cfg, &out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Environment dephasing rate, 1/us.
    Gamma,
    /// Pseudo-thermal drive amplitude, converted to a dephasing rate.
    AIn,
    /// Exchange rate of the scenario's coupling, rad/us.
    Omega,
    /// Shots per tomography setting.
    Shots,
}

impl std::str::FromStr for Axis {
    type Err = RunError;

    fn from_str(s: &str) -> RunResult<Self> {
        match s {
            "gamma" => Ok(Axis::Gamma),
            "a_in" => Ok(Axis::AIn),
            "omega" => Ok(Axis::Omega),
            "shots" => Ok(Axis::Shots),
            other => Err(RunError::Config(format!(
                "unknown sweep axis {other:?} (expected gamma, a_in, omega or shots)"
            ))),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::AIn => "a_in",
            Axis::Omega => "omega",
            Axis::Shots => "shots",
        }
    }

    fn apply(self, v: &mut Value, x: f64) -> RunResult<()> {
        let scenario = v
            .get("scenario")
            .and_then(|s| s.get("name"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let needs = |ok: &[&str]| {
            if ok.contains(&scenario.as_str()) {
                Ok(())
            } else {
                Err(RunError::Config(format!("axis {} cannot be swept for scenario {scenario:?}", self.name())))
            }
        };
        match self {
            Axis::Gamma | Axis::AIn => {
                needs(&["revival"])?;
                let (key, other) = if self == Axis::Gamma { ("gamma", "a_in") } else { ("a_in", "gamma") };
                if let Some(obj) = v.get_mut("scenario").and_then(Value::as_object_mut) {
                    obj.remove(other);
                }
                if self == Axis::AIn {
                    dephasing_from_noise_amplitude(x)?;
                }
                set_path(v, &format!("scenario.{key}"), Value::from(x))
            }
            Axis::Omega => {
                needs(&["chevron", "bell_prep", "revival", "dephasing_sweep", "zeno_sweep"])?;
                set_path(v, "scenario.omega", Value::from(x))
            }
            Axis::Shots => {
                if !(x >= 1.0 && x.fract() == 0.0) {
                    return Err(RunError::Config(format!("shots must be a positive integer, got {x}")));
                }
                set_path(v, "measurement.mode", Value::from("tomography"))?;
                set_path(v, "measurement.shots", Value::from(x as u64))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub reports: Vec<RunReport>,
    pub summary: PathBuf,
}

/// One run per value in `out_dir/<axis>_<index>/`, then `sweep.csv` and
/// `sweep.json` in `out_dir`. Runs execute on the current rayon pool and
/// results are kept in value order.
pub fn sweep(config: Value, overrides: &Overrides, axis: Axis, values: &[f64], out_dir: &Path) -> RunResult<SweepOutcome> {
    let mut base = config;
    overrides.apply(&mut base)?;
    // Reject a broken base config before fanning out.
    let mut probe = base.clone();
    if let Some(&x) = values.first() {
        axis.apply(&mut probe, x)?;
    }
    RunConfig::from_value(probe)?;

    let reports = values
        .par_iter()
        .enumerate()
        .map(|(k, &x)| {
            let mut v = base.clone();
            axis.apply(&mut v, x)?;
            run(v, &Overrides::default(), &out_dir.join(format!("{}_{k:03}", axis.name())))
        })
        .collect::<RunResult<Vec<_>>>()?;

    fs::create_dir_all(out_dir).map_err(|e| RunError::io(out_dir, e))?;
    let mut table = Table {
        file: "sweep.csv".to_string(),
        header: SWEEP_HEADER.iter().map(|s| s.to_string()).collect(),
        rows: Vec::new(),
    };
    for (&x, r) in values.iter().zip(&reports) {
        let get = |k: &str| r.scalars.get(k).copied().unwrap_or(f64::NAN);
        table.rows.push(vec![x, get("n_measure"), get("gamma_c"), get("fit_residual")]);
    }
    write_table(out_dir, &table)?;
    let summary = out_dir.join("sweep.json");
    write_json(
        &summary,
        &serde_json::json!({
            "axis": axis.name(),
            "values": values,
            "runs": reports.iter().enumerate().map(|(k, r)| serde_json::json!({
                "dir": format!("{}_{k:03}", axis.name()),
                "scalars": r.scalars,
            })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(SweepOutcome { reports, summary })
}

/// Parses `0,0.5,1` into values; an empty string is an empty list.
pub fn parse_values(s: &str) -> RunResult<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| RunError::Config(format!("bad sweep value {p:?}"))))
        .collect()
}
