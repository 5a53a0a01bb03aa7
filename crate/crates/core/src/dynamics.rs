//! Lindblad propagation of density matrices over staged schedules.
//!
//! The master equation is
//! `d rho/dt = -i[H, rho] + Σ_j (2 C_j rho C_j^† - rho C_j^† C_j - C_j^† C_j rho) / 2`
//! with `C_j = sqrt(rate_j) op_j`.
//!
//! Integration is classic fixed-step RK4. The generator is constant within a
//! stage, so one RK4 step acting on `vec(rho)` is exactly the matrix
//! polynomial `1 + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24` of the Liouvillian
//! superoperator `L`. That polynomial is formed once per stage and raised to
//! the recording stride, which gives the same iterates as stepping the
//! right-hand side directly.

#[allow(unused_imports)] // float methods come from here without std
use num_traits::Float;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::measures::{self, ConcurrenceSeries};
use crate::model::{
    collapse_operators, stage_hamiltonian, CollapseOperator, CouplingSpec, EvolveStage, QubitName,
    Stage, StageSchedule, SystemSpec,
};
use crate::qops::{adjoint, hermitian_eigs, ComplexMatrix, DensityMatrix, SubsystemLayout, C64};

/// Recorded states may not have an eigenvalue below this.
pub const POSITIVITY_ABORT: f64 = -1e-6;
/// Recorded states may not drift further than this from unit trace.
pub const TRACE_ABORT: f64 = 1e-6;
/// Largest allowed `step * max_rate`.
pub const MAX_STEP_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    #[default]
    FixedRk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorConfig {
    /// us.
    pub step: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub method: Method,
    /// Record a state every this many steps.
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    /// 1 ns steps, recorded every 50 ns.
    fn default() -> Self {
        Self {
            step: 0.001,
            method: Method::FixedRk4,
            record_every: 50,
        }
    }
}

impl IntegratorConfig {
    pub fn record_interval(&self) -> f64 {
        self.step * self.record_every as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!("integrator step {}", self.step)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Right-hand side of the master equation at `rho`.
pub fn lindblad_rhs(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    collapse: &[CollapseOperator],
) -> Result<ComplexMatrix> {
    let n = h.check_square()?;
    if rho.rows() != n || rho.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.rows(),
        });
    }
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (&h.try_matmul(rho)? - &rho.try_matmul(h)?).scale(minus_i);
    for c in collapse {
        if c.op.rows() != n || c.op.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.op.rows(),
            });
        }
        let cd = adjoint(&c.op);
        let cdc = cd.try_matmul(&c.op)?;
        let jump = c.op.try_matmul(rho)?.try_matmul(&cd)?;
        let anti = &cdc.try_matmul(rho)? + &rho.try_matmul(&cdc)?;
        out += &(&jump - &anti.scale_real(0.5)).scale_real(c.rate);
    }
    Ok(out)
}

/// Liouvillian superoperator on row-major `vec(rho)`.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    superop: ComplexMatrix,
    max_rate: f64,
}

impl Generator {
    pub fn new(h: &ComplexMatrix, collapse: &[CollapseOperator]) -> Result<Self> {
        let n = h.check_square()?;
        let defect = h.hermitian_defect();
        if !(defect <= crate::qops::HERMITIAN_TOL) {
            return Err(Error::NotHermitian { defect });
        }
        for c in collapse {
            if !(c.rate >= 0.0) {
                return Err(Error::InvalidParameter(format!("negative rate on {}", c.label)));
            }
        }
        let d2 = n * n;
        let mut superop = ComplexMatrix::zeros(d2, d2);
        let mut basis = ComplexMatrix::zeros(n, n);
        for k in 0..d2 {
            basis.as_mut_slice()[k] = C64::new(1.0, 0.0);
            let col = lindblad_rhs(&basis, h, collapse)?;
            for (r, &v) in col.as_slice().iter().enumerate() {
                superop[(r, k)] = v;
            }
            basis.as_mut_slice()[k] = C64::new(0.0, 0.0);
        }
        let spectrum = hermitian_eigs(h)?;
        let spread = spectrum.values.last().unwrap_or(&0.0) - spectrum.values.first().unwrap_or(&0.0);
        let damping: f64 = collapse
            .iter()
            .map(|c| 2.0 * c.rate * c.op.frobenius_norm().powi(2) / n as f64)
            .sum();
        Ok(Self {
            dim: n,
            superop,
            max_rate: spread.max(damping),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Crude bound on the fastest rate present (1/us).
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn superoperator(&self) -> &ComplexMatrix {
        &self.superop
    }

    /// One RK4 step of length `h` as a superoperator.
    pub fn rk4_propagator(&self, h: f64) -> ComplexMatrix {
        let d2 = self.dim * self.dim;
        let id = ComplexMatrix::identity(d2);
        let hl = self.superop.scale_real(h);
        // Horner form of the degree-4 Taylor polynomial.
        let mut p = id.clone();
        for k in [4.0, 3.0, 2.0, 1.0] {
            p = &id + &(&hl * &p).scale_real(1.0 / k);
        }
        p
    }
}

fn matrix_power(m: &ComplexMatrix, mut e: usize) -> ComplexMatrix {
    let mut result = ComplexMatrix::identity(m.rows());
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Recorded evolution: times, states and named scalar series.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub observables: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds at least one state")
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Ancilla–Qubit concurrence series, when computed.
    pub fn concurrence(&self) -> Option<ConcurrenceSeries> {
        self.observable("concurrence").map(|v| ConcurrenceSeries {
            times: self.times.clone(),
            values: v.to_vec(),
        })
    }

    /// Adds `z_<initial>` per qubit and, when both Ancilla and Qubit are in
    /// the layout, their `concurrence` after tracing out everything else.
    pub fn with_observables(mut self, layout: &SubsystemLayout) -> Result<Self> {
        for (i, label) in layout.labels().iter().enumerate() {
            let name = observable_name(label);
            let series = self.states.iter().map(|s| z_expectation(s, layout, i)).collect();
            self.observables.push((name, series));
        }
        let a = layout.index_of(QubitName::Ancilla.label());
        let q = layout.index_of(QubitName::Qubit.label());
        if let (Some(a), Some(q)) = (a, q) {
            let mut series = Vec::with_capacity(self.states.len());
            for s in &self.states {
                let pair = if layout.len() == 2 {
                    s.matrix().clone()
                } else {
                    crate::qops::partial_trace(s, layout, &[a.min(q), a.max(q)])?
                };
                series.push(measures::concurrence(&pair)?);
            }
            self.observables.push(("concurrence".to_string(), series));
        }
        Ok(self)
    }

    /// Checks the recorded-state invariants at the given tolerances.
    pub fn check_invariants(&self, trace_tol: f64, positivity_tol: f64) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("times not strictly increasing".to_string()));
        }
        for (t, s) in self.times.iter().zip(&self.states) {
            let tr = s.trace_re();
            let min = s.min_eigenvalue()?;
            if (tr - 1.0).abs() > trace_tol || min < -positivity_tol {
                return Err(Error::Numerical {
                    time: *t,
                    min_eigenvalue: min,
                    trace: tr,
                });
            }
        }
        Ok(())
    }
}

fn observable_name(label: &str) -> String {
    let initial = label.chars().next().map(|c| c.to_ascii_lowercase()).unwrap_or('x');
    format!("z_{initial}")
}

/// `<sigma_z>` of one qubit from the diagonal.
fn z_expectation(rho: &DensityMatrix, layout: &SubsystemLayout, site: usize) -> f64 {
    let shift = layout.len() - 1 - site;
    (0..rho.dim())
        .map(|k| {
            let sign = if (k >> shift) & 1 == 0 { 1.0 } else { -1.0 };
            sign * rho[(k, k)].re
        })
        .sum()
}

fn to_state(v: &[C64], n: usize) -> DensityMatrix {
    let m = ComplexMatrix::from_vec(n, n, v.to_vec()).expect("vec(rho) has n*n entries");
    DensityMatrix::new_unchecked(m.hermitian_part())
}

fn check_state(rho: &DensityMatrix, time: f64) -> Result<()> {
    let tr = rho.trace_re();
    let min = rho.min_eigenvalue()?;
    if min < POSITIVITY_ABORT || (tr - 1.0).abs() > TRACE_ABORT || !tr.is_finite() {
        return Err(Error::Numerical {
            time,
            min_eigenvalue: min,
            trace: tr,
        });
    }
    Ok(())
}

/// Propagates `rho0` for `duration` us.
///
/// States are recorded at `t = 0`, every `record_every` steps and at the
/// final time. If `duration` is not a whole number of steps the step is
/// shortened uniformly. Recorded states are re-symmetrised and propagation
/// continues from the symmetrised state.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &ComplexMatrix,
    collapse: &[CollapseOperator],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let generator = Generator::new(h, collapse)?;
    evolve_with(rho0, &generator, duration, cfg)
}

/// As [`evolve`] with a prebuilt generator.
pub fn evolve_with(
    rho0: &DensityMatrix,
    generator: &Generator,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = generator.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.dim(),
        });
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidParameter(format!("duration {duration}")));
    }
    if cfg.step * generator.max_rate() >= MAX_STEP_RATE {
        return Err(Error::InvalidParameter(format!(
            "step {} too large for rate {} (step*rate must stay below {MAX_STEP_RATE})",
            cfg.step,
            generator.max_rate()
        )));
    }

    let mut steps = (duration / cfg.step).round() as usize;
    if ((steps as f64) * cfg.step - duration).abs() > 1e-9 * duration.max(1.0) {
        steps = (duration / cfg.step).ceil() as usize;
    }
    let h = if steps == 0 { 0.0 } else { duration / steps as f64 };

    let mut traj = Trajectory {
        times: alloc::vec![0.0],
        states: alloc::vec![rho0.clone()],
        observables: Vec::new(),
    };
    if steps == 0 {
        return Ok(traj);
    }

    let step = generator.rk4_propagator(h);
    let stride = cfg.record_every.min(steps);
    let block = matrix_power(&step, stride);
    let tail = steps % stride;
    let tail_block = (tail > 0).then(|| matrix_power(&step, tail));

    let mut v = rho0.matrix().as_slice().to_vec();
    let mut done = 0usize;
    while done < steps {
        let (prop, advance) = if steps - done >= stride {
            (&block, stride)
        } else {
            (tail_block.as_ref().expect("tail block exists"), steps - done)
        };
        v = prop.apply(&v);
        done += advance;
        let t = done as f64 * h;
        let state = to_state(&v, n);
        check_state(&state, t)?;
        v.copy_from_slice(state.matrix().as_slice());
        traj.times.push(t);
        traj.states.push(state);
    }
    Ok(traj)
}

/// Runs every stage of `schedule` in order.
///
/// Pulses act instantaneously: the state recorded at the pulse time is
/// replaced by the post-pulse state. Each stage after the first contributes
/// its states after its own `t = 0`, so times stay strictly increasing.
pub fn evolve_schedule(
    rho0: &DensityMatrix,
    spec: &SystemSpec,
    schedule: &StageSchedule,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if schedule.stages.is_empty() {
        return Err(Error::InvalidParameter("empty schedule".to_string()));
    }
    spec.validate()?;
    schedule.validate()?;
    let layout = spec.layout();
    if rho0.dim() != layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.total_dim(),
            found: rho0.dim(),
        });
    }

    let mut traj = Trajectory {
        times: alloc::vec![0.0],
        states: alloc::vec![rho0.clone()],
        observables: Vec::new(),
    };
    let mut offset = 0.0;
    for stage in &schedule.stages {
        match stage {
            Stage::Pulse(p) => {
                let u = p.unitary(&layout)?;
                let last = traj.states.last_mut().expect("non-empty");
                *last = last.conjugate_by(&u)?;
            }
            Stage::Evolve(e) => {
                let part = run_stage(traj.final_state(), spec, e, &layout, cfg)?;
                for (t, s) in part.times.into_iter().zip(part.states).skip(1) {
                    traj.times.push(offset + t);
                    traj.states.push(s);
                }
                offset += e.duration;
            }
        }
    }
    traj.with_observables(&layout)
}

fn run_stage(
    rho: &DensityMatrix,
    spec: &SystemSpec,
    stage: &EvolveStage,
    layout: &SubsystemLayout,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let h = stage_hamiltonian(stage, layout)?;
    let ops = collapse_operators(spec, stage)?;
    evolve(rho, &h, &ops, stage.duration, cfg)
}

/// Population map of a detuning scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ChevronMap {
    /// rad/us.
    pub detunings: Vec<f64>,
    /// us.
    pub times: Vec<f64>,
    /// `values[i][k]`: `<sigma_z>` of the observed qubit at `detunings[i]`, `times[k]`.
    pub values: Vec<Vec<f64>>,
}

/// Excites `coupling.pair.0`, switches on the exchange at each detuning and
/// records `<sigma_z>` of `observe`.
pub fn chevron_scan(
    spec: &SystemSpec,
    coupling: &CouplingSpec,
    detunings: &[f64],
    duration: f64,
    observe: QubitName,
    intrinsic: bool,
    cfg: &IntegratorConfig,
) -> Result<ChevronMap> {
    spec.validate()?;
    let layout = spec.layout();
    let rho0 = crate::model::register_basis(&[coupling.pair.0]);
    let site = observe.index();
    let mut values = Vec::with_capacity(detunings.len());
    let mut times = Vec::new();
    for &detuning in detunings {
        let stage = EvolveStage {
            duration,
            couplings: alloc::vec![CouplingSpec { detuning, ..*coupling }],
            dephasing: Vec::new(),
            intrinsic,
        };
        let traj = run_stage(&rho0, spec, &stage, &layout, cfg)?;
        values.push(traj.states.iter().map(|s| z_expectation(s, &layout, site)).collect());
        times = traj.times;
    }
    Ok(ChevronMap {
        detunings: detunings.to_vec(),
        times,
        values,
    })
}

/// Best two-qubit dephasing-only description of an Ancilla–Qubit
/// concurrence series.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDephasingFit {
    /// Effective Ramsey rate of the Qubit, 1/us.
    pub qubit_rate: f64,
    /// Fixed Ramsey rate of the Ancilla, 1/us.
    pub ancilla_rate: f64,
    /// Largest `|C_model - C_target|` over the grid.
    pub max_deviation: f64,
    pub model: Vec<f64>,
}

/// Concurrence of the Ancilla ⊗ Qubit pair evolving from `rho0` under
/// `sigma_z` dephasing at the given Ramsey rates.
pub fn pair_dephasing_concurrence(
    rho0: &DensityMatrix,
    ancilla_rate: f64,
    qubit_rate: f64,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let layout = crate::model::pair_layout();
    let ops = [
        CollapseOperator::new(
            crate::qops::embed(&crate::qops::sigma_z(), 0, &layout)?,
            0.5 * ancilla_rate,
            "dephasing Ancilla",
        ),
        CollapseOperator::new(
            crate::qops::embed(&crate::qops::sigma_z(), 1, &layout)?,
            0.5 * qubit_rate,
            "dephasing Qubit",
        ),
    ];
    evolve(rho0, &ComplexMatrix::zeros(4, 4), &ops, duration, cfg)?.with_observables(&layout)
}

/// Fits the Qubit's effective dephasing rate of the two-qubit model to a
/// target concurrence series by least squares (golden-section search on
/// `[0, max_rate]`).
pub fn fit_pair_dephasing(
    rho0: &DensityMatrix,
    ancilla_rate: f64,
    target: &ConcurrenceSeries,
    max_rate: f64,
    cfg: &IntegratorConfig,
) -> Result<PairDephasingFit> {
    let duration = *target.times.last().ok_or(Error::InsufficientData { needed: 2, found: 0 })?;
    let model_at = |rate: f64| -> Result<Vec<f64>> {
        let traj = pair_dephasing_concurrence(rho0, ancilla_rate, rate, duration, cfg)?;
        let c = traj.observable("concurrence").expect("pair layout has concurrence");
        if c.len() != target.values.len() {
            return Err(Error::DimensionMismatch {
                expected: target.values.len(),
                found: c.len(),
            });
        }
        Ok(c.to_vec())
    };
    let cost = |rate: f64| -> Result<f64> {
        Ok(model_at(rate)?
            .iter()
            .zip(&target.values)
            .map(|(m, t)| (m - t) * (m - t))
            .sum())
    };

    let ratio = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, max_rate);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (cost(x1)?, cost(x2)?);
    while hi - lo > 1e-7 * max_rate.max(1.0) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = cost(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = cost(x2)?;
        }
    }
    let qubit_rate = 0.5 * (lo + hi);
    let model = model_at(qubit_rate)?;
    let max_deviation = model
        .iter()
        .zip(&target.values)
        .map(|(m, t)| (m - t).abs())
        .fold(0.0, f64::max);
    Ok(PairDephasingFit {
        qubit_rate,
        ancilla_rate,
        max_deviation,
        model,
    })
}
