use thiserror::Error;

/// Errors produced by the model, field, propagation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time {t} is outside the domain of this operation: {reason}")]
    InvalidTime { t: f64, reason: &'static str },

    #[error("every grid point lies below the node threshold {threshold:e}")]
    AllMasked { threshold: f64 },

    #[error("density has no mass on the support [{lo}, {hi}]")]
    ZeroMass { lo: f64, hi: f64 },

    #[error("not in fringed regime: found {found} interior maxima, need at least 3")]
    NotFringed { found: usize },

    #[error("time {0} is not stored in the ensemble")]
    TimeNotStored(f64),

    #[error("{aborted} of {total} trajectories aborted (limit is 1%)")]
    TooManyAborts {
        aborted: usize,
        total: usize,
        report: Vec<crate::trajectories::AbortRecord>,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
