//! Crate-wide error type.
//!
//! Each variant corresponds to one failure family surfaced by the public
//! API: shape mismatches in numeric kernels, invalid configuration, malformed
//! input files, ill-posed solver problems, oracle failures, and out-of-range
//! indices. I/O errors are wrapped so loaders can use `?` directly.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible (e.g. dot product of unequal lengths).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration value is out of its documented range.
    #[error("invalid config: {0}")]
    Config(String),

    /// An input file does not follow its declared format.
    #[error("malformed input: {0}")]
    Format(String),

    /// A solver problem statement is ill-posed (asymmetric Hessian, …).
    #[error("ill-posed problem: {0}")]
    Problem(String),

    /// The brute-force oracle could not produce a reference point.
    #[error("oracle failure: {0}")]
    Oracle(String),

    /// An id or index is outside its valid range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand constructors keep call sites compact.
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn problem(msg: impl Into<String>) -> Self {
        Error::Problem(msg.into())
    }

    pub fn oracle(msg: impl Into<String>) -> Self {
        Error::Oracle(msg.into())
    }

    pub fn index(msg: impl Into<String>) -> Self {
        Error::Index(msg.into())
    }
}
