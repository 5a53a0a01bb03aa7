use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |h - h^dagger| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("unknown qubit `{0}`")]
    UnknownQubit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: need {needed}, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("time grid is not uniform")]
    NonUniformGrid,

    #[error("state left the physical set at t = {time} us (min eigenvalue {min_eigenvalue:e}, trace {trace})")]
    Numerical {
        time: f64,
        min_eigenvalue: f64,
        trace: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
