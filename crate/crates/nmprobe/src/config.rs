//! JSON scenario configuration and `key=value` overrides.

use std::path::Path;

use nmprobe_core::dynamics::IntegratorConfig;
use nmprobe_core::model::{QubitName, SystemSpec, OMEGA_QA, OMEGA_QE, SQRT_ISWAP_DURATION};
use nmprobe_core::tomography::{ReadoutModel, DEFAULT_SHOTS};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{RunError, RunResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub system: SystemChoice,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub measurement: Measurement,
    /// Readout of the Ancilla ⊗ Qubit pair in tomography mode.
    #[serde(default)]
    pub readout: ReadoutModel,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemChoice {
    Preset(SystemPreset),
    Custom(Box<SystemSpec>),
}

impl Default for SystemChoice {
    fn default() -> Self {
        SystemChoice::Preset(SystemPreset::MeasuredDevice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemPreset {
    /// Measured T1, T2* and readout fidelities.
    MeasuredDevice,
    /// Measured T2* with amplitude damping off.
    DephasingOnly,
}

impl SystemChoice {
    pub fn resolve(&self) -> SystemSpec {
        match self {
            SystemChoice::Preset(SystemPreset::MeasuredDevice) => SystemSpec::measured_device(),
            SystemChoice::Preset(SystemPreset::DephasingOnly) => SystemSpec::dephasing_only(),
            SystemChoice::Custom(spec) => (**spec).clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Measurement {
    /// Concurrence of the exact reduced state.
    #[default]
    Exact,
    /// Simulated readout of every recorded state followed by MLE.
    Tomography {
        #[serde(default = "default_shots")]
        shots: u64,
        /// Rise threshold for the thresholded measure; estimated by
        /// resampling when absent.
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default = "default_resamples")]
        resamples: usize,
    },
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

fn default_resamples() -> usize {
    8
}

/// State of the register at `t = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `(|01> - i|10>)/sqrt(2)` on Ancilla ⊗ Qubit, Environment in `|0>`;
    /// the phase the exchange gate produces.
    #[default]
    IdealBell,
    /// π pulse and a 530 ns exchange gate simulated with intrinsic noise.
    Gate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Detuning scan of the exchange between two qubits.
    Chevron {
        duration: f64,
        #[serde(default = "default_omega_qa")]
        omega: f64,
        #[serde(default = "default_pair")]
        pair: (QubitName, QubitName),
        #[serde(default = "default_observe")]
        observe: QubitName,
        #[serde(default = "default_span")]
        detuning_span_mhz: f64,
        #[serde(default = "default_detuning_step")]
        detuning_step_mhz: f64,
        #[serde(default = "default_true")]
        intrinsic: bool,
    },
    /// π pulse plus exchange gate starting from the ground state.
    BellPrep {
        #[serde(default = "default_gate")]
        gate_duration: f64,
        #[serde(default = "default_omega_qa")]
        omega: f64,
        #[serde(default = "default_true")]
        intrinsic: bool,
    },
    /// Entangled pair with the Environment decoupled.
    FreeDecay {
        #[serde(default = "default_window")]
        duration: f64,
        #[serde(default)]
        initial: InitialState,
    },
    /// Qubit–Environment exchange with engineered Environment dephasing.
    /// Exactly one of `gamma` and `a_in` is required.
    Revival {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        a_in: Option<f64>,
        #[serde(default = "default_omega_qe")]
        omega: f64,
        #[serde(default)]
        detuning: f64,
        #[serde(default = "default_window")]
        duration: f64,
        #[serde(default)]
        initial: InitialState,
    },
    /// Revival runs over a grid of dephasing rates or noise amplitudes.
    DephasingSweep {
        #[serde(default)]
        gammas: Option<Vec<f64>>,
        #[serde(default)]
        a_in: Option<Vec<f64>>,
        #[serde(default = "default_omega_qe")]
        omega: f64,
        #[serde(default = "default_window")]
        duration: f64,
        #[serde(default)]
        initial: InitialState,
    },
    /// Strong-dephasing runs compared with `Ω²/(4γ) + Γ_0` and with a
    /// two-qubit dephasing model.
    ZenoSweep {
        #[serde(default = "default_zeno_gammas")]
        gammas: Vec<f64>,
        #[serde(default = "default_omega_qe")]
        omega: f64,
        /// Background decay rate; defaults to the summed Ramsey rates of
        /// Ancilla and Qubit.
        #[serde(default)]
        gamma0: Option<f64>,
        #[serde(default = "default_window")]
        duration: f64,
        #[serde(default)]
        initial: InitialState,
        #[serde(default = "default_true")]
        pair_fit: bool,
    },
}

fn default_true() -> bool {
    true
}
fn default_omega_qa() -> f64 {
    OMEGA_QA
}
fn default_omega_qe() -> f64 {
    OMEGA_QE
}
fn default_pair() -> (QubitName, QubitName) {
    (QubitName::Qubit, QubitName::Ancilla)
}
fn default_observe() -> QubitName {
    QubitName::Ancilla
}
fn default_span() -> f64 {
    1.5
}
fn default_detuning_step() -> f64 {
    0.05
}
fn default_gate() -> f64 {
    SQRT_ISWAP_DURATION
}
fn default_window() -> f64 {
    10.0
}
fn default_zeno_gammas() -> Vec<f64> {
    vec![3.0, 4.5, 6.4]
}

/// 16 log-spaced dephasing rates on `[0.05, 8]` 1/us.
pub fn default_sweep_gammas() -> Vec<f64> {
    let (lo, hi) = (0.05f64.ln(), 8.0f64.ln());
    (0..16).map(|k| (lo + (hi - lo) * k as f64 / 15.0).exp()).collect()
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Chevron { .. } => "chevron",
            Scenario::BellPrep { .. } => "bell_prep",
            Scenario::FreeDecay { .. } => "free_decay",
            Scenario::Revival { .. } => "revival",
            Scenario::DephasingSweep { .. } => "dephasing_sweep",
            Scenario::ZenoSweep { .. } => "zeno_sweep",
        }
    }
}

fn positive(name: &str, v: f64) -> RunResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RunError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> RunResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RunError::Config(format!("{name} must be non-negative, got {v}")))
    }
}

impl RunConfig {
    pub fn from_value(v: Value) -> RunResult<Self> {
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> RunResult<()> {
        self.system.resolve().validate()?;
        positive("integrator.step", self.integrator.step)?;
        if self.integrator.record_every == 0 {
            return Err(RunError::Config("integrator.record_every must be at least 1".into()));
        }
        if let Measurement::Tomography { shots, threshold, resamples } = self.measurement {
            if shots == 0 {
                return Err(RunError::Config("measurement.shots must be positive".into()));
            }
            if let Some(t) = threshold {
                non_negative("measurement.threshold", t)?;
            }
            if threshold.is_none() && resamples < 2 {
                return Err(RunError::Config("measurement.resamples must be at least 2".into()));
            }
        }
        self.readout.validate()?;
        match &self.scenario {
            Scenario::Chevron { duration, omega, pair, detuning_span_mhz, detuning_step_mhz, .. } => {
                non_negative("duration", *duration)?;
                non_negative("omega", *omega)?;
                non_negative("detuning_span_mhz", *detuning_span_mhz)?;
                positive("detuning_step_mhz", *detuning_step_mhz)?;
                if pair.0 == pair.1 {
                    return Err(RunError::Config("pair must name two different qubits".into()));
                }
            }
            Scenario::BellPrep { gate_duration, omega, .. } => {
                non_negative("gate_duration", *gate_duration)?;
                non_negative("omega", *omega)?;
            }
            Scenario::FreeDecay { duration, .. } => non_negative("duration", *duration)?,
            Scenario::Revival { gamma, a_in, omega, detuning, duration, .. } => {
                match (gamma, a_in) {
                    (Some(g), None) => non_negative("gamma", *g)?,
                    (None, Some(a)) => non_negative("a_in", *a)?,
                    _ => return Err(RunError::Config("revival needs exactly one of gamma and a_in".into())),
                }
                non_negative("omega", *omega)?;
                if !detuning.is_finite() {
                    return Err(RunError::Config("detuning must be finite".into()));
                }
                non_negative("duration", *duration)?;
            }
            Scenario::DephasingSweep { gammas, a_in, omega, duration, .. } => {
                let values = match (gammas, a_in) {
                    (Some(_), Some(_)) => {
                        return Err(RunError::Config("give gammas or a_in, not both".into()));
                    }
                    (Some(v), None) | (None, Some(v)) => v.clone(),
                    (None, None) => Vec::new(),
                };
                for v in values {
                    non_negative("sweep value", v)?;
                }
                non_negative("omega", *omega)?;
                non_negative("duration", *duration)?;
            }
            Scenario::ZenoSweep { gammas, omega, gamma0, duration, .. } => {
                for g in gammas {
                    positive("gamma", *g)?;
                }
                non_negative("omega", *omega)?;
                if let Some(g0) = gamma0 {
                    non_negative("gamma0", *g0)?;
                }
                positive("duration", *duration)?;
            }
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }
}

pub fn read_config_value(path: &Path) -> RunResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

/// Sets `path` (dot-separated, numeric segments index arrays) to `value`.
/// Missing object keys are created.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> RunResult<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(RunError::Config(format!("bad override key {path:?}")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                map.entry(*part).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| RunError::Config(format!("{path}: {part:?} is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| RunError::Config(format!("{path}: index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(RunError::Config(format!("{path}: {part:?} is inside a scalar"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Applies a `key=value` override; the value is parsed as JSON when it
/// can be and taken as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> RunResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| RunError::Config(format!("override {spec:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, key.trim(), value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn minimal_revival_config() {
        let cfg = RunConfig::from_value(json!({"scenario": {"name": "revival", "gamma": 0.5}})).unwrap();
        assert_eq!(cfg.scenario.name(), "revival");
        assert_eq!(cfg.measurement, Measurement::Exact);
        assert_eq!(cfg.integrator, IntegratorConfig::default());
    }

    #[test]
    fn incomplete_configs_are_rejected() {
        for bad in [
            json!({"scenario": {"name": "revival"}}),
            json!({"scenario": {"name": "revival", "gamma": 1.0, "a_in": 0.3}}),
            json!({"scenario": {"name": "chevron"}}),
            json!({"scenario": {"name": "free_decay", "gama": 1.0}}),
            json!({"scenario": {"name": "nope"}}),
            json!({"scenario": {"name": "free_decay"}, "integrator": {"step": -1.0, "record_every": 5}}),
            json!({"scenario": {"name": "free_decay"}, "measurement": {"mode": "tomography", "shots": 0}}),
            json!({"scenario": {"name": "zeno_sweep", "gammas": [0.0]}}),
        ] {
            assert!(matches!(RunConfig::from_value(bad.clone()), Err(RunError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut v = json!({"scenario": {"name": "revival", "gamma": 0.5}, "list": [1, 2]});
        apply_override(&mut v, "scenario.gamma=1.5").unwrap();
        apply_override(&mut v, "measurement.mode=tomography").unwrap();
        apply_override(&mut v, "list.1=7").unwrap();
        assert_eq!(v["scenario"]["gamma"], json!(1.5));
        assert_eq!(v["measurement"]["mode"], json!("tomography"));
        assert_eq!(v["list"][1], json!(7));
        assert!(apply_override(&mut v, "list.5=1").is_err());
        assert!(apply_override(&mut v, "scenario.gamma.x=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn system_presets_and_custom() {
        let cfg = RunConfig::from_value(json!({"scenario": {"name": "free_decay"}, "system": "dephasing_only"})).unwrap();
        assert!(cfg.system.resolve().qubits.iter().all(|q| q.t1.is_none()));
        let custom = serde_json::to_value(SystemSpec::measured_device()).unwrap();
        let cfg = RunConfig::from_value(json!({"scenario": {"name": "free_decay"}, "system": custom})).unwrap();
        assert_eq!(cfg.system.resolve(), SystemSpec::measured_device());
    }

    #[test]
    fn sweep_grid() {
        let g = default_sweep_gammas();
        assert_eq!(g.len(), 16);
        assert!((g[0] - 0.05).abs() < 1e-12 && (g[15] - 8.0).abs() < 1e-12);
    }
}
