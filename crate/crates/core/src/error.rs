use thiserror::Error;

/// Errors raised by the core numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    /// An index or truncation level exceeds the available data.
    #[error("out of bounds: {0}")]
    OutOfBounds(&'static str),

    /// Covariance factorization failed even after jitter escalation.
    #[error("matrix factorization failed (last jitter tried: {jitter:e})")]
    Factorization { jitter: f64 },

    /// Input sequences whose lengths must agree do not.
    #[error("length mismatch: {0}")]
    LengthMismatch(&'static str),
}

pub type Result<T> = core::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        CoreError::InvalidParameter { name, reason }
    }
}
