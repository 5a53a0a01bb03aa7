//! Numerical core for the entanglement-probe simulator.
//!
//! A three-qubit register (Ancilla ⊗ Qubit ⊗ Environment) is propagated under
//! staged Lindblad dynamics. The Ancilla–Qubit pair is then characterised by
//! its concurrence, the rise-based non-Markovianity measure, exponential
//! decay fits and, optionally, a simulated tomography + maximum-likelihood
//! reconstruction.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel sweeps live in the `nmprobe` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod measures;
pub mod model;
pub mod qops;
pub mod tomography;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use qops::{ComplexMatrix, DensityMatrix, SubsystemLayout, C64};
