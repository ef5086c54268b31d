//! Crate-wide error type.
//!
//! Validation problems (bad parameters, bad configs) are kept separate from
//! numerical failures (non-convergence, non-finite values) so that callers
//! such as the CLI can map them to distinct exit codes.

/// Errors produced by the index engines, simulators and the oracle.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated a precondition (wrong sign, non-finite, out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// A named configuration field failed validation.
    #[error("config error: field `{field}`: {message}")]
    Config { field: String, message: String },

    /// Parameters lie outside the regime in which the formula is proven valid.
    #[error("regime error: {0}")]
    Regime(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A non-finite value appeared mid-computation.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for errors that indicate bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config { .. } | Error::Regime(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Require a finite value, naming the offending argument otherwise.
pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("`{name}` must be finite, got {value}")))
    }
}

/// Require a strictly positive finite value.
pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain(format!(
            "`{name}` must be positive, got {value}"
        )))
    }
}

/// Require a non-negative finite value.
pub(crate) fn ensure_nonneg(name: &str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain(format!(
            "`{name}` must be non-negative, got {value}"
        )))
    }
}
