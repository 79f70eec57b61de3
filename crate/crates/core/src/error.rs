use thiserror::Error;

/// Errors raised by the teleoperation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mass matrix is not positive definite at q = {0:?}")]
    MassMatrixNotPositiveDefinite(Vec<f64>),

    #[error("slave index {index} out of range for {count} slaves")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("arrival times out of order: sample {k} arrives at {arrival} before {previous}")]
    EventOrdering { k: usize, arrival: f64, previous: f64 },

    #[error("simulation diverged at t = {time}: {reason}")]
    Divergence { time: f64, reason: String },

    #[error("general matrix gains unsupported: {0}")]
    UnsupportedGains(String),

    #[error("insufficient history: need {needed:.4} s before t = {time:.4}, have {available:.4} s")]
    InsufficientHistory {
        needed: f64,
        available: f64,
        time: f64,
    },

    #[error("feasibility is not monotone in MATI on the scan grid near {0:.4}")]
    NonMonotone(f64),

    #[error("empty trace")]
    EmptyTrace,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(actual: usize, expected: usize, context: &'static str) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}
