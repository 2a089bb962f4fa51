use thiserror::Error;

/// Errors shared by every module of the crate.
///
/// The CLI maps `Validation` and `Domain` to exit status 2 and the
/// convergence/numerical variants to exit status 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (last residual {last_residual:.3e})")]
    Convergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn convergence(history: Vec<f64>) -> Self {
        Error::Convergence {
            iterations: history.len(),
            last_residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        }
    }

    /// True for errors caused by bad inputs rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
