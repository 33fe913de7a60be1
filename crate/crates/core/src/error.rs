use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a model invariant.
    #[error("{0}")]
    Domain(String),

    #[error("{what}: size {size} exceeds the supported maximum {limit}")]
    Size {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is singular or too ill-conditioned to invert")]
    SingularMatrix,

    #[error("expected {expected} increments, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// E[exp(-V)] diverges for the given quadratic form.
    #[error("exponential moment is not finite: {0}")]
    Integrability(String),

    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
