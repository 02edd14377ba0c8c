use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent p = {0}: must be a finite real >= 1")]
    InvalidExponent(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix has numeric rank 0")]
    ZeroRank,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("rounding did not start: {0}")]
    Rounding(String),

    #[error("projection contract violated: {0}")]
    Projection(String),

    #[error("stage {stage} failed after {attempts} attempts: {reason}")]
    StageFailure {
        stage: u8,
        attempts: usize,
        reason: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
