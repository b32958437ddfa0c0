use thiserror::Error;

/// Errors raised by the solvers, estimators and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("fit undefined: {0}")]
    FitUndefined(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Sup-norm of the residual after each accepted step.
        history: Vec<f64>,
        /// Displacements of the last iterate.
        last_iterate: Vec<f64>,
    },

    /// A failure inside a sweep, tagged with the system size that caused it.
    #[error("at n = {n}: {source}")]
    AtSize {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Innermost error, looking through [`Error::AtSize`].
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSize { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
