use std::path::PathBuf;

use thiserror::Error;

use crate::transport::FixedPointReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weights do not form a simplex: {0}")]
    Simplex(String),

    #[error("fixed-point iteration did not converge after {} iterations (residual {:e})", .0.iterations, .0.residual)]
    Convergence(Box<FixedPointReport>),

    #[error("insufficient data: need more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("misaligned return matrix: {0}")]
    Misaligned(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: row {row}: close price {close} is not positive")]
    NonPositivePrice {
        path: PathBuf,
        row: usize,
        close: f64,
    },

    #[error("{path}: row {row}: duplicate date {date}")]
    DuplicateDate {
        path: PathBuf,
        row: usize,
        date: chrono::NaiveDate,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub(crate) fn check_probability(name: &str, u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {u}")))
    }
}
