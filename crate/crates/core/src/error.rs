use thiserror::Error;

/// Errors produced by the simulator and the classical database model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate record {record}")]
    DuplicateRecord { line: usize, record: String },

    #[error("record set is empty")]
    EmptySet,

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("value bound mismatch: {left} vs {right}")]
    ValueBoundMismatch { left: u32, right: u32 },

    #[error("value {value} is not below the value bound {bound}")]
    ValueOutOfRange { value: u32, bound: u32 },

    #[error("index {index} out of range for a set of padded size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("pair ({i}, {j}) does not match")]
    PairNotMatching { i: usize, j: usize },

    #[error("{bits} qubits exceed the simulator cap of {cap}")]
    CapExceeded { bits: u32, cap: u32 },

    #[error("state norm {norm} deviates from 1 by more than {tolerance}")]
    NormViolation { norm: f64, tolerance: f64 },

    #[error("ancilla registers hold probability mass {mass}")]
    EntangledAncilla { mass: f64 },

    #[error("success probability is undefined without marked states")]
    NoMarkedStates,

    #[error("{0}")]
    InvalidParameter(String),

    #[error("record is not contained in the universe: {0}")]
    NotInUniverse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
