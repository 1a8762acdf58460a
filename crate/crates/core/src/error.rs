//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A mode count or matrix dimension is unusable (for example `M = 0`).
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A state, distribution or objective value failed an integrity check.
    #[error("numeric integrity error: {0}")]
    Numeric(String),
    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),
    /// The request exceeds a documented size bound.
    #[error("refused: {0}")]
    Refused(String),
    /// A closed-form result was requested outside its validity range.
    #[error("out of validity range: {0}")]
    OutOfValidity(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_computational(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
