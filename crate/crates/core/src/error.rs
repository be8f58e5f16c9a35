use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular or nearly singular (column {column}: |r_ii| = {value:e})")]
    Singular { column: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {dim} exceeds the enumeration limit of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("enumeration box of {points} points exceeds the limit of {limit}")]
    BoxTooLarge { points: u128, limit: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not implemented: {0}")]
    Unimplemented(&'static str),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
