use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a model or configuration invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky factorization broke down; usually a precision parameter at an
    /// extreme magnitude.
    #[error("{matrix} is not numerically positive definite (smallest pivot {pivot:e})")]
    NotPositiveDefinite { matrix: &'static str, pivot: f64 },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("chain aborted at iteration {iteration}: {source}")]
    ChainAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// A derived quantity contradicts the construction that produced it.
    #[error("certificate inconsistency: {0}")]
    Inconsistent(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } | Error::Sampler(_) | Error::Inconsistent(_) => true,
            Error::ChainAborted { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
