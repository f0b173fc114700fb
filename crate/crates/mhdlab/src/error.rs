//! Error types shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two fields that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An operation contract was violated (wrong component count, non-finite data, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A geometric object (cylinder, mollifier support, ...) exits the sampled domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical parameter is out of its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed snapshot file (bad header, payload length mismatch, ...).
    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
