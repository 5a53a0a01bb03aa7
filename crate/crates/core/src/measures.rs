//! Entanglement and memory measures for two-qubit trajectories.

#[allow(unused_imports)] // float methods come from here without std
use num_traits::Float;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::qops::{hermitian_eigs, kron, psd_sqrt, sigma_y, ComplexMatrix, STATE_POSITIVITY_TOL, STATE_TRACE_TOL};

/// Concurrence values may stray outside `[0, 1]` by at most this.
pub const CONCURRENCE_TOL: f64 = 1e-9;

fn check_two_qubit_state(rho: &ComplexMatrix) -> Result<()> {
    if rho.rows() != 4 || rho.cols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.rows(),
        });
    }
    let eig = hermitian_eigs(rho)?;
    let tr: f64 = eig.values.iter().sum();
    if (tr - 1.0).abs() > STATE_TRACE_TOL {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    if eig.min() < -STATE_POSITIVITY_TOL {
        return Err(Error::InvalidState(format!("eigenvalue {}", eig.min())));
    }
    Ok(())
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &ComplexMatrix) -> Result<f64> {
    check_two_qubit_state(rho)?;
    let rho = rho.hermitian_part();
    let yy = kron(&sigma_y(), &sigma_y());
    let flipped = &(&yy * &rho.conj()) * &yy;
    let s = psd_sqrt(&rho)?;
    let r = (&(&s * &flipped) * &s).hermitian_part();
    let mut lambdas: Vec<f64> = hermitian_eigs(&r)?
        .values
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.clamp(0.0, 1.0))
}

/// `<psi|rho|psi>` for the single-excitation Bell state with phase `phi`.
pub fn bell_fidelity(rho: &ComplexMatrix, phi: f64) -> Result<f64> {
    check_two_qubit_state(rho)?;
    let target = crate::model::bell_state(phi);
    let overlap = crate::qops::trace(&rho.try_matmul(target.matrix())?)?;
    Ok(overlap.re)
}

/// Concurrence sampled on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConcurrenceSeries {
    /// us.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ConcurrenceSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = Self { times, values };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Restricts to samples with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= lo - 1e-12 && **t <= hi + 1e-12)
            .map(|(t, v)| (*t, *v))
            .unzip();
        Self { times, values }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: self.values.len(),
            });
        }
        if let Some(v) = self
            .values
            .iter()
            .find(|v| !(**v >= -CONCURRENCE_TOL && **v <= 1.0 + CONCURRENCE_TOL))
        {
            return Err(Error::InvalidParameter(format!("concurrence {v} outside [0, 1]")));
        }
        Ok(())
    }

    fn check_uniform(&self) -> Result<()> {
        let Some(dt0) = self.times.windows(2).next().map(|w| w[1] - w[0]) else {
            return Ok(());
        };
        if !(dt0 > 0.0) {
            return Err(Error::NonUniformGrid);
        }
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt0).abs() > 1e-6 * dt0 {
                return Err(Error::NonUniformGrid);
            }
        }
        Ok(())
    }

    fn checked(&self, needed: usize) -> Result<()> {
        self.validate()?;
        if self.len() < needed {
            return Err(Error::InsufficientData {
                needed,
                found: self.len(),
            });
        }
        self.check_uniform()
    }
}

/// Total variation minus net loss: `Σ|ΔC| - (C_0 - C_f)`, which is twice
/// the summed rises. Zero for monotone decay.
pub fn non_markovianity(series: &ConcurrenceSeries) -> Result<f64> {
    non_markovianity_thresholded(series, 0.0)
}

/// As [`non_markovianity`] but ignores single-step rises not exceeding
/// `threshold`: `2 Σ_{ΔC_i > threshold} ΔC_i`.
pub fn non_markovianity_thresholded(series: &ConcurrenceSeries, threshold: f64) -> Result<f64> {
    series.checked(2)?;
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold}")));
    }
    if threshold == 0.0 {
        let v = &series.values;
        let variation: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let net = v[0] - v[v.len() - 1];
        return Ok((variation - net).max(0.0));
    }
    Ok(2.0
        * series
            .values
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > threshold)
            .sum::<f64>())
}

/// The first sample followed by every strict local maximum.
pub fn revival_envelope(series: &ConcurrenceSeries) -> Result<Vec<(f64, f64)>> {
    series.checked(3)?;
    let v = &series.values;
    let mut out = alloc::vec![(series.times[0], v[0])];
    for i in 1..v.len() - 1 {
        if v[i] > v[i - 1] && v[i] > v[i + 1] {
            out.push((series.times[i], v[i]));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    /// 1/us, `>= 0`.
    pub rate: f64,
    pub amplitude: f64,
    /// RMS of `y - amplitude * exp(-rate * t)` over the fitted points.
    pub residual: f64,
    /// Points that entered the fit.
    pub points: usize,
}

/// Fits `A exp(-Γ t)` by log-linear least squares weighted by `y`.
///
/// Non-positive values are dropped. Tiny negative rates from round-off are
/// clamped to zero; a clearly growing series is an error.
pub fn fit_exponential_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(t, y)| t.is_finite() && *y > 1e-12 && y.is_finite())
        .collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            found: used.len(),
        });
    }
    let (mut sw, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in &used {
        let w = y;
        let l = y.ln();
        sw += w;
        st += w * t;
        sl += w * l;
        stt += w * t * t;
        stl += w * t * l;
    }
    let det = sw * stt - st * st;
    if !(det.abs() > 1e-300) {
        return Err(Error::InsufficientData {
            needed: 3,
            found: 1,
        });
    }
    let slope = (sw * stl - st * sl) / det;
    let intercept = (sl - slope * st) / sw;
    let mut rate = -slope;
    if rate < 0.0 {
        if rate < -1e-6 {
            return Err(Error::InvalidParameter(format!("series grows at rate {}", -rate)));
        }
        rate = 0.0;
    }
    let amplitude = intercept.exp();
    let ss: f64 = used
        .iter()
        .map(|&(t, y)| {
            let r = y - amplitude * (-rate * t).exp();
            r * r
        })
        .sum();
    Ok(DecayFit {
        rate,
        amplitude,
        residual: (ss / used.len() as f64).sqrt(),
        points: used.len(),
    })
}

/// Decay rate of a concurrence series restricted to `[t_lo, t_hi]`.
///
/// Fits the revival envelope when it has at least three points, otherwise
/// every sample in the window.
pub fn fit_concurrence_decay(series: &ConcurrenceSeries, t_lo: f64, t_hi: f64) -> Result<DecayFit> {
    let w = series.window(t_lo, t_hi);
    let envelope = revival_envelope(&w)?;
    if envelope.len() >= 3 {
        fit_exponential_decay(&envelope)
    } else {
        let all: Vec<(f64, f64)> = w.times.iter().copied().zip(w.values.iter().copied()).collect();
        fit_exponential_decay(&all)
    }
}

/// Strong-dephasing decay rate `Ω² / (4γ) + Γ_0`.
pub fn zeno_rate(omega: f64, gamma: f64, gamma0: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if !(gamma0 >= 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter("negative background rate".to_string()));
    }
    Ok(omega * omega / (4.0 * gamma) + gamma0)
}
