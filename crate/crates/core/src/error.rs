use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{what}: {n} qubits exceeds the limit of {max}")]
    Capacity {
        what: &'static str,
        n: usize,
        max: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("depolarizing channel is singular (p = {0})")]
    SingularChannel(f64),

    #[error("confusion matrix for qubit {0} is singular")]
    SingularConfusion(usize),

    #[error("unstable OTOC normalization: mean <W>^2 = {0:e}")]
    UnstableNormalization(f64),

    #[error("time grids do not match")]
    GridMismatch,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
