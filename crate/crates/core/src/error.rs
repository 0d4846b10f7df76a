//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor order outside the supported 2..=4 range.
    #[error("tensor order {0} is outside the supported range 2..=4")]
    InvalidOrder(usize),

    /// Too few realisations for the requested estimator.
    #[error("need at least {need} rows, got {got}")]
    InsufficientData { need: usize, got: usize },

    /// A matrix that must be symmetric is not.
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    /// Sample covariance too close to singular to invert.
    #[error(
        "covariance is numerically singular: eigenvalue {eigenvalue:.6e} at or below floor {floor:.6e}"
    )]
    SingularCovariance { eigenvalue: f64, floor: f64 },

    /// Parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed, inconsistent, or degenerate input data.
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure at runtime (factorization, convergence).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Ingestion failure with the offending cell (1-based row/column of the file).
    #[error("ingestion error at row {row}, column {col}: {reason}")]
    Ingest {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse category used for CLI exit codes and error prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Data,
    Domain,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Data => "data",
            ErrorCategory::Domain => "domain",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

impl Error {
    /// Category of the error, for machine-parsable reporting.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidOrder(_) | Error::Domain(_) => ErrorCategory::Domain,
            Error::InsufficientData { .. }
            | Error::NotSymmetric(_)
            | Error::Data(_)
            | Error::Ingest { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorCategory::Data,
            Error::SingularCovariance { .. } | Error::Numeric(_) => ErrorCategory::Numeric,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
