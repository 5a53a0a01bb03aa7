//! Device description: qubit parameters, effective exchange couplings,
//! dissipation channels and evolution schedules.
//!
//! Register order is fixed to Ancilla ⊗ Qubit ⊗ Environment. Rates are in
//! 1/us and angular rates in rad/us; durations are in us.

#[allow(unused_imports)] // float methods come from here without std
use num_traits::Float;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, TAU};
use core::fmt;
use core::str::FromStr;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    embed, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, ComplexMatrix, DensityMatrix,
    SubsystemLayout, C64,
};

/// Qubit–Ancilla parametric exchange rate, rad/us.
pub const OMEGA_QA: f64 = TAU * 0.477;
/// Qubit–Environment parametric exchange rate, rad/us.
pub const OMEGA_QE: f64 = TAU * 0.473;
/// Duration of the hardware √iSWAP used for Bell preparation, us.
pub const SQRT_ISWAP_DURATION: f64 = 0.530;
/// Average readout fidelity of the Qubit.
pub const QUBIT_READOUT_FIDELITY: f64 = 0.97;
/// Average readout fidelity of the Ancilla.
pub const ANCILLA_READOUT_FIDELITY: f64 = 0.96;

const NOISE_DEPHASING_COEFF: f64 = 1.84;
const NOISE_DEPHASING_EXPONENT: f64 = 1.5;

/// Converts a frequency in MHz to an angular rate in rad/us.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum QubitName {
    Ancilla,
    Qubit,
    Environment,
}

impl QubitName {
    pub const ALL: [QubitName; 3] = [QubitName::Ancilla, QubitName::Qubit, QubitName::Environment];

    pub fn label(self) -> &'static str {
        match self {
            QubitName::Ancilla => "Ancilla",
            QubitName::Qubit => "Qubit",
            QubitName::Environment => "Environment",
        }
    }

    /// Position in the register.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for QubitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QubitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QubitName::ALL
            .into_iter()
            .find(|q| q.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownQubit(s.to_string()))
    }
}

/// Device parameters that do not enter the effective two-level model.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DeviceInfo {
    pub qubit_freq_ghz: Option<f64>,
    pub anharmonicity_mhz: Option<f64>,
    pub dispersive_shift_khz: Option<f64>,
    pub cavity_freq_ghz: Option<f64>,
    pub cavity_linewidth_khz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct QubitParams {
    pub name: QubitName,
    /// Energy relaxation time in us; `None` disables amplitude damping.
    #[cfg_attr(feature = "serde", serde(default))]
    pub t1: Option<f64>,
    /// Ramsey coherence time in us.
    pub t2_star: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub readout_fidelity: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub info: DeviceInfo,
}

impl QubitParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{}: {msg}", self.name)));
        if !(self.t2_star > 0.0) {
            return bad(format!("t2_star must be positive, got {}", self.t2_star));
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return bad(format!("t1 must be positive, got {t1}"));
            }
            if self.t2_star > 2.0 * t1 {
                return bad(format!("t2_star {} exceeds 2*t1 = {}", self.t2_star, 2.0 * t1));
            }
        }
        if let Some(f) = self.readout_fidelity {
            if !(f > 0.5 && f <= 1.0) {
                return bad(format!("readout fidelity {f} outside (0.5, 1]"));
            }
        }
        Ok(())
    }

    /// `1/T1`, zero when amplitude damping is disabled.
    pub fn relaxation_rate(&self) -> f64 {
        self.t1.map_or(0.0, |t1| 1.0 / t1)
    }

    /// `gamma_phi = 1/T2* - 1/(2 T1)`.
    pub fn pure_dephasing_rate(&self) -> Result<f64> {
        let rate = 1.0 / self.t2_star - 0.5 * self.relaxation_rate();
        if rate < -1e-15 {
            return Err(Error::InvalidParameter(format!(
                "{}: negative pure dephasing rate {rate}",
                self.name
            )));
        }
        Ok(rate.max(0.0))
    }
}

/// How an engineered dephasing rate maps onto the `sigma_z` Lindblad coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DephasingConvention {
    /// `gamma` is the Ramsey coherence decay rate; coefficient `gamma / 2`.
    #[default]
    Ramsey,
    /// `gamma (sigma_z rho sigma_z - rho)`; coherence decays as `exp(-2 gamma t)`.
    LindbladUnit,
}

impl DephasingConvention {
    pub fn coefficient(self, gamma: f64) -> f64 {
        match self {
            DephasingConvention::Ramsey => 0.5 * gamma,
            DephasingConvention::LindbladUnit => gamma,
        }
    }

    /// Ramsey decay rate of the dephased qubit's coherence.
    pub fn coherence_rate(self, gamma: f64) -> f64 {
        2.0 * self.coefficient(gamma)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SystemSpec {
    pub qubits: [QubitParams; 3],
    #[cfg_attr(feature = "serde", serde(default))]
    pub dephasing_convention: DephasingConvention,
}

impl SystemSpec {
    /// Measured device parameters (T1, T2*, readout fidelities and the
    /// informational frequencies).
    pub fn measured_device() -> Self {
        let q = |name, t1, t2, fid, f, a, chi, fc, k| QubitParams {
            name,
            t1: Some(t1),
            t2_star: t2,
            readout_fidelity: fid,
            info: DeviceInfo {
                qubit_freq_ghz: Some(f),
                anharmonicity_mhz: Some(a),
                dispersive_shift_khz: Some(chi),
                cavity_freq_ghz: Some(fc),
                cavity_linewidth_khz: Some(k),
            },
        };
        Self {
            qubits: [
                q(
                    QubitName::Ancilla,
                    32.0,
                    41.0,
                    Some(ANCILLA_READOUT_FIDELITY),
                    4.2,
                    212.0,
                    230.0,
                    6.94,
                    270.0,
                ),
                q(
                    QubitName::Qubit,
                    31.0,
                    39.0,
                    Some(QUBIT_READOUT_FIDELITY),
                    4.65,
                    180.0,
                    250.0,
                    7.09,
                    206.0,
                ),
                q(QubitName::Environment, 28.0, 38.0, None, 5.37, 140.0, 265.0, 7.21, 170.0),
            ],
            dephasing_convention: DephasingConvention::Ramsey,
        }
    }

    /// Measured T2* values with amplitude damping switched off.
    pub fn dephasing_only() -> Self {
        let mut spec = Self::measured_device();
        for q in &mut spec.qubits {
            q.t1 = None;
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        for (i, q) in self.qubits.iter().enumerate() {
            q.validate()?;
            if self.qubits[..i].iter().any(|p| p.name == q.name) {
                return Err(Error::InvalidParameter(format!("duplicate qubit {}", q.name)));
            }
        }
        Ok(())
    }

    pub fn qubit(&self, name: QubitName) -> &QubitParams {
        self.qubits
            .iter()
            .find(|q| q.name == name)
            .expect("validated spec holds every qubit")
    }

    pub fn qubit_mut(&mut self, name: QubitName) -> &mut QubitParams {
        self.qubits
            .iter_mut()
            .find(|q| q.name == name)
            .expect("validated spec holds every qubit")
    }

    pub fn layout(&self) -> SubsystemLayout {
        register_layout()
    }
}

/// Ancilla ⊗ Qubit ⊗ Environment.
pub fn register_layout() -> SubsystemLayout {
    SubsystemLayout::qubits(&QubitName::ALL.map(QubitName::label))
}

/// Ancilla ⊗ Qubit.
pub fn pair_layout() -> SubsystemLayout {
    SubsystemLayout::qubits(&[QubitName::Ancilla.label(), QubitName::Qubit.label()])
}

/// Effective resonant exchange between two qubits.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CouplingSpec {
    pub pair: (QubitName, QubitName),
    /// Exchange rate, rad/us.
    pub omega: f64,
    /// Detuning from parametric resonance, rad/us.
    #[cfg_attr(feature = "serde", serde(default))]
    pub detuning: f64,
}

impl CouplingSpec {
    pub fn resonant(a: QubitName, b: QubitName, omega: f64) -> Self {
        Self {
            pair: (a, b),
            omega,
            detuning: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative exchange rate {}", self.omega)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("non-finite detuning".to_string()));
        }
        if self.pair.0 == self.pair.1 {
            return Err(Error::InvalidParameter(format!("coupling of {} to itself", self.pair.0)));
        }
        Ok(())
    }
}

/// Engineered Markovian dephasing on one qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DephasingSpec {
    pub qubit: QubitName,
    /// 1/us, interpreted through the system's [`DephasingConvention`].
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EvolveStage {
    pub duration: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub couplings: Vec<CouplingSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub dephasing: Vec<DephasingSpec>,
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub intrinsic: bool,
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

impl EvolveStage {
    pub fn idle(duration: f64) -> Self {
        Self {
            duration,
            couplings: Vec::new(),
            dephasing: Vec::new(),
            intrinsic: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum PulseAxis {
    X,
    Y,
}

/// Instantaneous single-qubit rotation `exp(-i angle/2 sigma_axis)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Pulse {
    pub qubit: QubitName,
    pub axis: PulseAxis,
    /// Radians.
    pub angle: f64,
}

impl Pulse {
    pub fn pi_x(qubit: QubitName) -> Self {
        Self {
            qubit,
            axis: PulseAxis::X,
            angle: core::f64::consts::PI,
        }
    }

    pub fn unitary(&self, layout: &SubsystemLayout) -> Result<ComplexMatrix> {
        let site = layout
            .index_of(self.qubit.label())
            .ok_or_else(|| Error::UnknownQubit(self.qubit.label().to_string()))?;
        let generator = match self.axis {
            PulseAxis::X => sigma_x(),
            PulseAxis::Y => sigma_y(),
        };
        embed(&rotation(&generator, self.angle), site, layout)
    }
}

/// `exp(-i angle/2 P)` for a Pauli `P`.
pub fn rotation(pauli: &ComplexMatrix, angle: f64) -> ComplexMatrix {
    let (s, c) = (0.5 * angle).sin_cos();
    let id = ComplexMatrix::identity(pauli.rows()).scale_real(c);
    &id + &pauli.scale(C64::new(0.0, -s))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Stage {
    Evolve(EvolveStage),
    Pulse(Pulse),
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
}

impl StageSchedule {
    pub fn new(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    pub fn validate(&self) -> Result<()> {
        for stage in &self.stages {
            match stage {
                Stage::Evolve(e) => {
                    if !(e.duration >= 0.0) || !e.duration.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "stage duration {} must be finite and non-negative",
                            e.duration
                        )));
                    }
                    for c in &e.couplings {
                        c.validate()?;
                    }
                    for d in &e.dephasing {
                        if !(d.gamma >= 0.0) {
                            return Err(Error::InvalidParameter(format!(
                                "negative dephasing rate {} on {}",
                                d.gamma, d.qubit
                            )));
                        }
                    }
                }
                Stage::Pulse(p) => {
                    if !p.angle.is_finite() {
                        return Err(Error::InvalidParameter("non-finite pulse angle".to_string()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::Evolve(e) => e.duration,
                Stage::Pulse(_) => 0.0,
            })
            .sum()
    }
}

/// π pulse on the Qubit followed by a resonant Qubit–Ancilla exchange of
/// the given duration.
pub fn bell_preparation(omega_qa: f64, duration: f64, intrinsic: bool) -> StageSchedule {
    StageSchedule::new(vec![
        Stage::Pulse(Pulse::pi_x(QubitName::Qubit)),
        Stage::Evolve(EvolveStage {
            duration,
            couplings: vec![CouplingSpec::resonant(QubitName::Qubit, QubitName::Ancilla, omega_qa)],
            dephasing: Vec::new(),
            intrinsic,
        }),
    ])
}

fn site(layout: &SubsystemLayout, q: QubitName) -> Result<usize> {
    layout
        .index_of(q.label())
        .ok_or_else(|| Error::UnknownQubit(q.label().to_string()))
}

/// `H = (omega/2)(s+ s- + s- s+) + (detuning/2)(sz_a - sz_b)/2` embedded in
/// the register.
///
/// From `|e_a g_b>` the transferred population follows
/// `omega^2/(omega^2+detuning^2) sin^2(sqrt(omega^2+detuning^2) t / 2)`.
pub fn exchange_hamiltonian(c: &CouplingSpec, layout: &SubsystemLayout) -> Result<ComplexMatrix> {
    c.validate()?;
    let a = site(layout, c.pair.0)?;
    let b = site(layout, c.pair.1)?;
    let (pa, ma) = (embed(&sigma_plus(), a, layout)?, embed(&sigma_minus(), a, layout)?);
    let (pb, mb) = (embed(&sigma_plus(), b, layout)?, embed(&sigma_minus(), b, layout)?);
    let hop = &(&pa * &mb) + &(&ma * &pb);
    let zdiff = &embed(&sigma_z(), a, layout)? - &embed(&sigma_z(), b, layout)?;
    Ok(&hop.scale_real(0.5 * c.omega) + &zdiff.scale_real(0.25 * c.detuning))
}

/// Sum of the exchange terms active in a stage.
pub fn stage_hamiltonian(stage: &EvolveStage, layout: &SubsystemLayout) -> Result<ComplexMatrix> {
    let n = layout.total_dim();
    let mut h = ComplexMatrix::zeros(n, n);
    for c in &stage.couplings {
        h += &exchange_hamiltonian(c, layout)?;
    }
    Ok(h)
}

/// Collapse operator `op` with rate `rate`; the Lindblad operator is
/// `sqrt(rate) * op`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOperator {
    pub op: ComplexMatrix,
    pub rate: f64,
    pub label: String,
}

impl CollapseOperator {
    pub fn new(op: ComplexMatrix, rate: f64, label: impl Into<String>) -> Self {
        Self {
            op,
            rate,
            label: label.into(),
        }
    }
}

/// Dissipation channels of a stage.
///
/// Intrinsic channels per qubit: `sigma_minus` at `1/T1` and `sigma_z` at
/// `gamma_phi / 2`. Engineered dephasing adds `sigma_z` at the coefficient
/// selected by the system's [`DephasingConvention`]. Zero-rate channels are
/// omitted.
pub fn collapse_operators(spec: &SystemSpec, stage: &EvolveStage) -> Result<Vec<CollapseOperator>> {
    collapse_operators_on(spec, stage, &spec.layout())
}

/// As [`collapse_operators`] but on an arbitrary sub-register; qubits absent
/// from `layout` contribute no intrinsic channels.
pub fn collapse_operators_on(
    spec: &SystemSpec,
    stage: &EvolveStage,
    layout: &SubsystemLayout,
) -> Result<Vec<CollapseOperator>> {
    let mut out = Vec::new();
    if stage.intrinsic {
        for q in &spec.qubits {
            q.validate()?;
            let Some(i) = layout.index_of(q.name.label()) else {
                continue;
            };
            let relax = q.relaxation_rate();
            if relax > 0.0 {
                out.push(CollapseOperator::new(
                    embed(&sigma_minus(), i, layout)?,
                    relax,
                    format!("relaxation {}", q.name),
                ));
            }
            let phi = q.pure_dephasing_rate()?;
            if phi > 0.0 {
                out.push(CollapseOperator::new(
                    embed(&sigma_z(), i, layout)?,
                    0.5 * phi,
                    format!("dephasing {}", q.name),
                ));
            }
        }
    }
    for d in &stage.dephasing {
        if !(d.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative dephasing rate {}", d.gamma)));
        }
        if d.gamma == 0.0 {
            continue;
        }
        out.push(CollapseOperator::new(
            embed(&sigma_z(), site(layout, d.qubit)?, layout)?,
            spec.dephasing_convention.coefficient(d.gamma),
            format!("engineered dephasing {}", d.qubit),
        ));
    }
    Ok(out)
}

/// `(|0_A 1_Q> + e^{i phi} |1_A 0_Q>) / sqrt(2)` over Ancilla ⊗ Qubit, i.e.
/// one excitation shared between the pair.
pub fn bell_state(phi: f64) -> DensityMatrix {
    let z = C64::new(0.0, 0.0);
    let psi = [
        z,
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::from_polar(FRAC_1_SQRT_2, phi),
        z,
    ];
    DensityMatrix::new_unchecked(ComplexMatrix::outer(&psi, &psi))
}

/// Environment dephasing from the pseudo-thermal drive amplitude:
/// `1.84 * a_in^1.5` (1/us).
pub fn dephasing_from_noise_amplitude(a_in: f64) -> Result<f64> {
    if !(a_in >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative noise amplitude {a_in}")));
    }
    Ok(NOISE_DEPHASING_COEFF * a_in.powf(NOISE_DEPHASING_EXPONENT))
}

/// Extends an Ancilla ⊗ Qubit state with the Environment in its ground state.
pub fn with_environment_ground(pair: &DensityMatrix) -> DensityMatrix {
    pair.tensor(&DensityMatrix::basis(2, 0))
}

/// Register basis state; `excited` lists the qubits in `|1>`.
pub fn register_basis(excited: &[QubitName]) -> DensityMatrix {
    let index = excited.iter().fold(0usize, |acc, q| acc | (1 << (2 - q.index())));
    DensityMatrix::basis(8, index)
}
