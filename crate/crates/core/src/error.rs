use thiserror::Error;

/// Errors raised by the library. Each variant maps onto a stable category
/// string so that front ends can report failures in a machine-readable way.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum McfError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("boundary point: {0}")]
    Boundary(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("singular matrix")]
    Singular,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("infinite mass: {0}")]
    InfiniteMass(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl McfError {
    pub fn category(&self) -> &'static str {
        match self {
            McfError::Domain(_) => "domain",
            McfError::Boundary(_) => "boundary",
            McfError::DimensionMismatch { .. } => "dimension",
            McfError::NonFinite(_) => "non-finite",
            McfError::Singular => "singular",
            McfError::Unsupported(_) => "unsupported",
            McfError::InfiniteMass(_) => "infinite-mass",
            McfError::UnknownAlgorithm(_) => "unknown-algorithm",
            McfError::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, McfError>;
