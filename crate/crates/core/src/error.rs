use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or preconditions supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),

    /// A parameter outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root or inverse was requested outside the attainable range.
    #[error("range error: {0}")]
    Range(String),

    /// Quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// An iterative solver (ODE, root-find, matching) failed to converge.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// The Casimir constraint was violated beyond tolerance.
    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Range(_) | Error::Quadrature { .. } | Error::Convergence(_) | Error::Constraint(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
