use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CscError {
    #[error("atom {index} has norm {norm:e}, below the normalization floor")]
    ZeroAtom { index: usize, norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("restricted Gram matrix is numerically singular: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("stopping rule not reached after {iterations} iterations")]
    StoppingNotReached { iterations: usize },

    #[error("invalid specification: {0}")]
    SpecInvalid(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, CscError>;
