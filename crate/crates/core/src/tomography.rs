//! Two-qubit state tomography: pre-rotations, readout error, shot sampling
//! and maximum-likelihood reconstruction.
//!
//! Both qubits are read out simultaneously; outcome `ab` is indexed as
//! `2a + b` with qubit `a` the first tensor factor.
//! Expectations are indexed `4i + j` for `σ_i ⊗ σ_j`, `σ = (I, X, Y, Z)`.

#[allow(unused_imports)] // float methods come from here without std
use num_traits::Float;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::model::rotation;
use crate::qops::{hermitian_eigs, kron, paulis, sigma_x, sigma_y, ComplexMatrix, DensityMatrix, C64};

/// Default shots per setting.
pub const DEFAULT_SHOTS: u64 = 5000;

/// Single-qubit pre-rotation applied before a Z-basis readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Rotation {
    #[cfg_attr(feature = "serde", serde(rename = "I"))]
    I,
    /// Turns the Z readout into an X measurement.
    #[cfg_attr(feature = "serde", serde(rename = "Ry90"))]
    Ry90,
    /// Turns the Z readout into a Y measurement.
    #[cfg_attr(feature = "serde", serde(rename = "Rx-90"))]
    RxMinus90,
}

impl Rotation {
    /// Index in `(I, X, Y, Z)` of the Pauli actually measured.
    pub fn measured_pauli(self) -> usize {
        match self {
            Rotation::Ry90 => 1,
            Rotation::RxMinus90 => 2,
            Rotation::I => 3,
        }
    }

    /// Rotation sense is chosen so that `U^† Z U` is `+X` for `Ry90` and
    /// `+Y` for `Rx-90`.
    pub fn unitary(self) -> ComplexMatrix {
        use core::f64::consts::FRAC_PI_2;
        match self {
            Rotation::I => ComplexMatrix::identity(2),
            Rotation::Ry90 => rotation(&sigma_y(), -FRAC_PI_2),
            Rotation::RxMinus90 => rotation(&sigma_x(), FRAC_PI_2),
        }
    }
}

/// Pre-rotation pair `(first qubit, second qubit)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TomographySetting(pub Rotation, pub Rotation);

impl TomographySetting {
    /// The nine settings: X, Y, Z on the first qubit (outer) times X, Y, Z
    /// on the second.
    pub const ALL: [TomographySetting; 9] = {
        use Rotation::*;
        [
            TomographySetting(Ry90, Ry90),
            TomographySetting(Ry90, RxMinus90),
            TomographySetting(Ry90, I),
            TomographySetting(RxMinus90, Ry90),
            TomographySetting(RxMinus90, RxMinus90),
            TomographySetting(RxMinus90, I),
            TomographySetting(I, Ry90),
            TomographySetting(I, RxMinus90),
            TomographySetting(I, I),
        ]
    };

    /// Position in [`TomographySetting::ALL`].
    pub fn position(self) -> usize {
        3 * (self.0.measured_pauli() - 1) + (self.1.measured_pauli() - 1)
    }

    /// Expectation indices this setting yields: first marginal, second
    /// marginal, correlator.
    pub fn expectation_indices(self) -> [usize; 3] {
        let (i, j) = (self.0.measured_pauli(), self.1.measured_pauli());
        [4 * i, j, 4 * i + j]
    }
}

/// `U_a ⊗ U_b` for a setting.
pub fn rotation_unitary(setting: TomographySetting) -> ComplexMatrix {
    kron(&setting.0.unitary(), &setting.1.unitary())
}

/// Symmetric per-qubit bit-flip readout error.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReadoutModel {
    pub fidelity_a: f64,
    pub fidelity_b: f64,
}

impl ReadoutModel {
    pub const PERFECT: ReadoutModel = ReadoutModel {
        fidelity_a: 1.0,
        fidelity_b: 1.0,
    };

    pub fn new(fidelity_a: f64, fidelity_b: f64) -> Result<Self> {
        let m = Self { fidelity_a, fidelity_b };
        m.validate()?;
        Ok(m)
    }

    /// Measured readout of the register's Ancilla ⊗ Qubit pair.
    pub fn device() -> Self {
        Self {
            fidelity_a: crate::model::ANCILLA_READOUT_FIDELITY,
            fidelity_b: crate::model::QUBIT_READOUT_FIDELITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.fidelity_a, self.fidelity_b] {
            if !(f > 0.5 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!("readout fidelity {f} outside (0.5, 1]")));
            }
        }
        Ok(())
    }
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self::device()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementRecord {
    pub setting: TomographySetting,
    /// Outcomes `00, 01, 10, 11`.
    pub counts: [u64; 4],
}

impl MeasurementRecord {
    pub fn frequencies(&self) -> Result<[f64; 4]> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return Err(Error::InsufficientData { needed: 1, found: 0 });
        }
        Ok(self.counts.map(|c| c as f64 / total as f64))
    }
}

fn check_probabilities(p: &[f64; 4]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !(*x >= -1e-12)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("not a probability vector: {p:?}")));
    }
    Ok(())
}

/// Outcome probabilities of a setting: the diagonal of `U rho U^†`.
pub fn ideal_probabilities(rho: &DensityMatrix, setting: TomographySetting) -> Result<[f64; 4]> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let r = rho.conjugate_by(&rotation_unitary(setting))?;
    Ok(core::array::from_fn(|k| r[(k, k)].re.max(0.0)))
}

/// Each bit flips independently with probability `1 - F`.
pub fn apply_readout_confusion(probs: &[f64; 4], model: &ReadoutModel) -> Result<[f64; 4]> {
    check_probabilities(probs)?;
    model.validate()?;
    let flip = |f: f64, x: usize, y: usize| if x == y { f } else { 1.0 - f };
    Ok(core::array::from_fn(|out| {
        (0..4)
            .map(|inp| {
                probs[inp] * flip(model.fidelity_a, out >> 1, inp >> 1) * flip(model.fidelity_b, out & 1, inp & 1)
            })
            .sum()
    }))
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Multinomial draw of `shots` outcomes from an existing generator.
pub fn sample_counts_with(rng: &mut impl RngCore, probs: &[f64; 4], shots: u64) -> Result<[u64; 4]> {
    check_probabilities(probs)?;
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".to_string()));
    }
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let mut cdf = [0.0; 4];
    let mut acc = 0.0;
    for (c, p) in cdf.iter_mut().zip(probs) {
        acc += p.max(0.0) / total;
        *c = acc;
    }
    let mut counts = [0u64; 4];
    for _ in 0..shots {
        let u = uniform(rng);
        // Outcomes with zero probability are never selected.
        let k = (0..4).find(|&k| u < cdf[k] && probs[k] > 0.0).unwrap_or_else(|| {
            (0..4).rev().find(|&k| probs[k] > 0.0).expect("some outcome has positive probability")
        });
        counts[k] += 1;
    }
    Ok(counts)
}

/// Multinomial draw, deterministic in `seed`.
pub fn sample_counts(probs: &[f64; 4], shots: u64, seed: u64) -> Result<[u64; 4]> {
    sample_counts_with(&mut ChaCha8Rng::seed_from_u64(seed), probs, shots)
}

/// Samples all nine settings of `rho` from one generator seeded with `seed`.
pub fn simulate_records(
    rho: &DensityMatrix,
    readout: &ReadoutModel,
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TomographySetting::ALL
        .iter()
        .map(|&setting| {
            let p = apply_readout_confusion(&ideal_probabilities(rho, setting)?, readout)?;
            Ok(MeasurementRecord {
                setting,
                counts: sample_counts_with(&mut rng, &p, shots)?,
            })
        })
        .collect()
}

/// Sixteen expectations from per-setting outcome probabilities. Repeated
/// marginals are averaged; `<II>` is 1.
pub fn expectations_from_probabilities(data: &[(TomographySetting, [f64; 4])]) -> Result<[f64; 16]> {
    let mut sums = [0.0; 16];
    let mut hits = [0usize; 16];
    let mut seen = [false; 9];
    for (setting, p) in data {
        let signed = |sa: f64, sb: f64| p[0] + sb * p[1] + sa * p[2] + sa * sb * p[3];
        let values = [signed(-1.0, 1.0), signed(1.0, -1.0), signed(-1.0, -1.0)];
        for (idx, v) in setting.expectation_indices().into_iter().zip(values) {
            sums[idx] += v;
            hits[idx] += 1;
        }
        seen[setting.position()] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !*s) {
        return Err(Error::InvalidParameter(format!(
            "missing tomography setting {:?}",
            TomographySetting::ALL[missing]
        )));
    }
    let mut out = [0.0; 16];
    out[0] = 1.0;
    for k in 1..16 {
        out[k] = sums[k] / hits[k] as f64;
    }
    Ok(out)
}

/// As [`expectations_from_probabilities`] on observed frequencies.
pub fn expectations_from_counts(records: &[MeasurementRecord]) -> Result<[f64; 16]> {
    let data = records
        .iter()
        .map(|r| Ok((r.setting, r.frequencies()?)))
        .collect::<Result<Vec<_>>>()?;
    expectations_from_probabilities(&data)
}

/// `Tr(rho σ_i ⊗ σ_j)` for all sixteen Pauli products.
pub fn pauli_expectations(rho: &ComplexMatrix) -> Result<[f64; 16]> {
    let ops = pauli_products();
    let mut out = [0.0; 16];
    for (o, m) in out.iter_mut().zip(&ops) {
        *o = crate::qops::trace(&rho.try_matmul(m)?)?.re;
    }
    Ok(out)
}

fn pauli_products() -> Vec<ComplexMatrix> {
    let p = paulis();
    p.iter().flat_map(|a| p.iter().map(move |b| kron(a, b))).collect()
}

/// `¼ Σ_k e_k σ_k`; Hermitian with unit trace but possibly not positive.
pub fn linear_inversion(expectations: &[f64; 16]) -> ComplexMatrix {
    let mut rho = ComplexMatrix::zeros(4, 4);
    for (e, m) in expectations.iter().zip(pauli_products()) {
        rho += &m.scale_real(0.25 * e);
    }
    rho
}

/// Entries `t_1 … t_16` of the lower-triangular factor `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TParams(pub [f64; 16]);

/// `(row, col)` of each complex off-diagonal pair `(t_5 + i t_6, …)`.
const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

impl TParams {
    pub fn to_t_matrix(&self) -> ComplexMatrix {
        let t = &self.0;
        let mut m = ComplexMatrix::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = C64::new(t[i], 0.0);
        }
        for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
            m[(r, c)] = C64::new(t[4 + 2 * k], t[5 + 2 * k]);
        }
        m
    }

    /// Inverse of [`TParams::to_t_matrix`] on the lower triangle. Rows are
    /// rephased so the diagonal is real and non-negative.
    pub fn from_t_matrix(m: &ComplexMatrix) -> Self {
        let mut t = [0.0; 16];
        let mut phases = [C64::new(1.0, 0.0); 4];
        for (i, ph) in phases.iter_mut().enumerate() {
            let d = m[(i, i)];
            if d.norm() > 0.0 {
                *ph = d.conj() / d.norm();
            }
            t[i] = (d * *ph).re;
        }
        for (k, &(r, c)) in OFF_DIAGONAL.iter().enumerate() {
            let z = m[(r, c)] * phases[r];
            t[4 + 2 * k] = z.re;
            t[5 + 2 * k] = z.im;
        }
        Self(t)
    }

    fn normalized(mut self) -> Self {
        for i in 0..4 {
            if self.0[i] < 0.0 {
                self.0[i] = -self.0[i];
                for (k, &(r, _)) in OFF_DIAGONAL.iter().enumerate() {
                    if r == i {
                        self.0[4 + 2 * k] = -self.0[4 + 2 * k];
                        self.0[5 + 2 * k] = -self.0[5 + 2 * k];
                    }
                }
            }
        }
        self
    }
}

/// `T^† T / Tr(T^† T)`.
pub fn t_to_rho(t: &TParams) -> Result<DensityMatrix> {
    let tm = t.to_t_matrix();
    let g = &crate::qops::adjoint(&tm) * &tm;
    let tr: f64 = (0..4).map(|i| g[(i, i)].re).sum();
    if !(tr > 0.0) {
        return Err(Error::InvalidParameter("all T parameters are zero".to_string()));
    }
    Ok(DensityMatrix::new_unchecked(g.scale_real(1.0 / tr).hermitian_part()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MleDiagnostics {
    /// `Σ_k (Tr(M_k rho) - p_k)^2` at the returned state.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

pub const MLE_GRADIENT_TOL: f64 = 1e-10;
pub const MLE_MAX_ITERATIONS: usize = 1000;

/// Lower-triangular `T` with `T^† T = rho` (clipped to PSD and slightly
/// regularised first).
fn initial_t(expectations: &[f64; 16]) -> Result<TParams> {
    let lin = linear_inversion(expectations).hermitian_part();
    let eig = hermitian_eigs(&lin)?;
    let clipped_sum: f64 = eig.values.iter().map(|x| x.max(0.0)).sum();
    let psd = if clipped_sum > 0.0 {
        eig.reconstruct_with(|x| x.max(0.0) / clipped_sum + 1e-10)
    } else {
        ComplexMatrix::identity(4).scale_real(0.25)
    };
    // Cholesky of the index-reversed matrix P rho P = L L^†; then
    // T = (P L P)^† is lower-triangular with T^† T = rho.
    let n = 4;
    let rev = ComplexMatrix::from_fn(n, n, |r, c| psd[(n - 1 - r, n - 1 - c)]);
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = rev[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        let d = d.max(1e-12).sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = rev[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    let plp = ComplexMatrix::from_fn(n, n, |r, c| l[(n - 1 - r, n - 1 - c)]);
    Ok(TParams::from_t_matrix(&crate::qops::adjoint(&plp)))
}

struct Objective {
    ops: Vec<ComplexMatrix>,
    targets: [f64; 16],
}

impl Objective {
    /// Residuals and their Jacobian (row k, column = parameter).
    fn eval(&self, t: &TParams) -> ([f64; 16], [[f64; 16]; 16]) {
        let tm = t.to_t_matrix();
        let td = crate::qops::adjoint(&tm);
        let g = &td * &tm;
        let s: f64 = (0..4).map(|i| g[(i, i)].re).sum();
        let mut r = [0.0; 16];
        let mut jac = [[0.0; 16]; 16];
        // dT per parameter: real unit at (i,i), real or imaginary unit off-diagonal.
        let mut dirs: Vec<(usize, usize, C64)> = (0..4).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        for &(row, col) in &OFF_DIAGONAL {
            dirs.push((row, col, C64::new(1.0, 0.0)));
            dirs.push((row, col, C64::new(0.0, 1.0)));
        }
        for (k, m) in self.ops.iter().enumerate() {
            let mt = m * &td;
            let val = crate::qops::trace(&m.try_matmul(&g).expect("4x4")).expect("square").re / s;
            r[k] = val - self.targets[k];
            for (p, &(row, col, unit)) in dirs.iter().enumerate() {
                // Tr(M T^† dT) = (M T^†)_{col,row} * unit; Tr(T^† dT) = conj(T_{row,col}) * unit.
                let a = 2.0 * (mt[(col, row)] * unit).re;
                let b = 2.0 * (tm[(row, col)].conj() * unit).re;
                jac[k][p] = (a - val * b) / s;
            }
        }
        (r, jac)
    }
}

fn cost_of(r: &[f64; 16]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: [[f64; 16]; 16], mut b: [f64; 16]) -> Option<[f64; 16]> {
    let n = 16;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-300) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = [0.0; 16];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Maximum-likelihood state for sixteen target expectations.
///
/// Levenberg–Marquardt on the residuals `Tr(M_k rho(t)) - p_k`, started
/// from the PSD-clipped linear inversion. Stops when `|∇ cost| < 1e-10` or
/// after 1000 iterations; an unconverged run still returns its best iterate.
pub fn mle_reconstruct(expectations: &[f64; 16]) -> Result<(DensityMatrix, MleDiagnostics)> {
    if expectations.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidParameter("non-finite expectation".to_string()));
    }
    let mut targets = *expectations;
    targets[0] = 1.0;
    let obj = Objective {
        ops: pauli_products(),
        targets,
    };
    let mut t = initial_t(&targets)?;
    let (mut r, mut jac) = obj.eval(&t);
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let gradient = |r: &[f64; 16], jac: &[[f64; 16]; 16]| -> ([f64; 16], f64) {
        let g: [f64; 16] = core::array::from_fn(|p| 2.0 * (0..16).map(|k| jac[k][p] * r[k]).sum::<f64>());
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        (g, norm)
    };
    let (mut grad, mut gnorm) = gradient(&r, &jac);
    while gnorm >= MLE_GRADIENT_TOL && iterations < MLE_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = [[0.0; 16]; 16];
        for (p, row) in jtj.iter_mut().enumerate() {
            for (q, v) in row.iter_mut().enumerate() {
                *v = (0..16).map(|k| jac[k][p] * jac[k][q]).sum();
            }
        }
        let mut improved = false;
        while lambda < 1e20 {
            let mut a = jtj;
            for (p, row) in a.iter_mut().enumerate() {
                row[p] += lambda * (1.0 + jtj[p][p]);
            }
            let rhs: [f64; 16] = core::array::from_fn(|p| -0.5 * grad[p]);
            if let Some(delta) = solve(a, rhs) {
                let trial = TParams(core::array::from_fn(|p| t.0[p] + delta[p]));
                if t_to_rho(&trial).is_ok() {
                    let (tr, tj) = obj.eval(&trial);
                    let tc = cost_of(&tr);
                    if tc <= cost {
                        t = trial;
                        r = tr;
                        jac = tj;
                        cost = tc;
                        lambda = (lambda * 0.3).max(1e-12);
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        (grad, gnorm) = gradient(&r, &jac);
        if !improved {
            break;
        }
    }
    let t = t.normalized();
    let rho = t_to_rho(&t)?;
    Ok((
        rho,
        MleDiagnostics {
            cost,
            iterations,
            converged: gnorm < MLE_GRADIENT_TOL,
            gradient_norm: gnorm,
        },
    ))
}

/// Reconstruction directly from the nine measurement records.
pub fn mle_from_records(records: &[MeasurementRecord]) -> Result<(DensityMatrix, MleDiagnostics)> {
    mle_reconstruct(&expectations_from_counts(records)?)
}
