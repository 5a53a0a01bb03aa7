//! Dense linear algebra and operator utilities for registers of at most a
//! handful of qubits (dimension ≤ 16).
//!
//! Computational basis convention: `|0>` is the ground state, so
//! `sigma_z = diag(1, -1)` and `sigma_minus = |0><1|`.

mod eig;
mod matrix;

#[allow(unused_imports)] // float methods come from here without std
use num_traits::Float;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;


pub use eig::{hermitian_eigs, HermitianEigen, HERMITIAN_TOL};
pub use matrix::{ComplexMatrix, C64};

use crate::error::{Error, Result};

/// Trace tolerance for accepting a matrix as a state.
pub const STATE_TRACE_TOL: f64 = 1e-6;
/// Most negative eigenvalue tolerated in a state.
pub const STATE_POSITIVITY_TOL: f64 = 1e-6;

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap()
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

/// Raising operator `|1><0|`.
pub fn sigma_plus() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]).unwrap()
}

/// Lowering operator `|0><1|`.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]).unwrap()
}

/// Single-qubit Paulis in the order I, X, Y, Z.
pub fn paulis() -> [ComplexMatrix; 4] {
    [ComplexMatrix::identity(2), sigma_x(), sigma_y(), sigma_z()]
}

/// Kronecker product; dimensions multiply.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |r, col| {
        a[(r / br, col / bc)] * b[(r % br, col % bc)]
    })
}

pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.cols(), a.rows(), |r, col| a[(col, r)].conj())
}

pub fn trace(a: &ComplexMatrix) -> Result<C64> {
    let n = a.check_square()?;
    Ok((0..n).map(|i| a[(i, i)]).sum())
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(&a.try_matmul(b)? - &b.try_matmul(a)?)
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok((a - b).frobenius_norm())
}

/// `½ Σ |eig(rho1 - rho2)|`.
pub fn trace_distance(rho1: &ComplexMatrix, rho2: &ComplexMatrix) -> Result<f64> {
    rho1.check_same_shape(rho2)?;
    let eig = hermitian_eigs(&(rho1 - rho2))?;
    Ok(0.5 * eig.values.iter().map(|x| x.abs()).sum::<f64>())
}

/// Principal square root of a PSD matrix; negative eigenvalues are clipped.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eigs(a)?.reconstruct_with(|x| x.max(0.0).sqrt()))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    rho.check_same_shape(sigma)?;
    let s = psd_sqrt(rho)?;
    let inner = (&s * sigma).try_matmul(&s)?.hermitian_part();
    let root_trace: f64 = hermitian_eigs(&inner)?
        .values
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .sum();
    Ok(root_trace * root_trace)
}

/// Dimensions and names of the tensor factors of a register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SubsystemLayout {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if dims.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: labels.len(),
            });
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter("subsystem dimension 0".to_string()));
        }
        Ok(Self { dims, labels })
    }

    /// All-qubit layout with the given labels.
    pub fn qubits<S: AsRef<str>>(labels: &[S]) -> Self {
        Self {
            dims: vec![2; labels.len()],
            labels: labels.iter().map(|l| l.as_ref().to_string()).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::SubsystemOutOfRange {
                index,
                count: self.len(),
            })
        }
    }

    /// Mixed-radix digits of a flat basis index, most significant first.
    fn digits(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        out
    }
}

/// Lift a single-site operator into the full register.
pub fn embed(op: &ComplexMatrix, site: usize, layout: &SubsystemLayout) -> Result<ComplexMatrix> {
    layout.check_index(site)?;
    let d = layout.dims[site];
    if op.rows() != d || op.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.rows(),
        });
    }
    let mut out = ComplexMatrix::identity(1);
    for (i, &dim) in layout.dims.iter().enumerate() {
        out = if i == site {
            kron(&out, op)
        } else {
            kron(&out, &ComplexMatrix::identity(dim))
        };
    }
    Ok(out)
}

/// Reduced matrix over the subsystems in `keep` (kept in layout order).
pub fn partial_trace(
    rho: &ComplexMatrix,
    layout: &SubsystemLayout,
    keep: &[usize],
) -> Result<ComplexMatrix> {
    let n = rho.check_square()?;
    if n != layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.total_dim(),
            found: n,
        });
    }
    for &k in keep {
        layout.check_index(k)?;
    }
    let kept: Vec<bool> = (0..layout.len()).map(|i| keep.contains(&i)).collect();
    let kept_dim: usize = layout
        .dims
        .iter()
        .zip(&kept)
        .filter(|(_, &k)| k)
        .map(|(d, _)| d)
        .product();

    // Split every flat index into (kept index, traced index).
    let split: Vec<(usize, usize)> = (0..n)
        .map(|flat| {
            let digits = layout.digits(flat);
            let (mut ki, mut ti) = (0, 0);
            for ((&digit, &d), &k) in digits.iter().zip(&layout.dims).zip(&kept) {
                if k {
                    ki = ki * d + digit;
                } else {
                    ti = ti * d + digit;
                }
            }
            (ki, ti)
        })
        .collect();

    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for i in 0..n {
        let (ki, ti) = split[i];
        for j in 0..n {
            let (kj, tj) = split[j];
            if ti == tj {
                out[(ki, kj)] += rho[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity at the crate tolerances.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        validate_state(&m)?;
        Ok(Self(m))
    }

    /// Wraps without validation; callers guarantee the invariants.
    pub fn new_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".to_string()));
        }
        Ok(Self(ComplexMatrix::outer(psi, psi).scale_real(1.0 / norm)))
    }

    /// Computational basis state `|index><index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = C64::new(1.0, 0.0);
        Self(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `<psi|rho|psi>` for a normalised `psi`.
    pub fn expectation_pure(&self, psi: &[C64]) -> f64 {
        let v = self.0.apply(psi);
        psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C64>().re
    }

    /// `Tr(rho * op)`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        trace(&self.0.try_matmul(op)?)
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        Ok(Self(u.try_matmul(&self.0)?.try_matmul(&adjoint(u))?))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Self {
        Self(kron(&self.0, &other.0))
    }

    pub fn partial_trace(&self, layout: &SubsystemLayout, keep: &[usize]) -> Result<Self> {
        partial_trace(&self.0, layout, keep).map(Self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigs(&self.0)?.min())
    }

    pub fn trace_re(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }
}

impl Deref for DensityMatrix {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

fn validate_state(m: &ComplexMatrix) -> Result<()> {
    m.check_square()?;
    let defect = m.hermitian_defect();
    if !(defect <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian { defect });
    }
    let tr = trace(m)?;
    if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
        return Err(Error::InvalidState(alloc::format!("trace {tr}")));
    }
    let min = hermitian_eigs(m)?.min();
    if min < -STATE_POSITIVITY_TOL {
        return Err(Error::InvalidState(alloc::format!("min eigenvalue {min:e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
