use thiserror::Error;

/// Errors raised by the numerical kernels and the scenario harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unresolved control profile: {0}")]
    Resolution(String),

    #[error("divergence at t = {time}: norm {norm:.6e} exceeded {limit:.6e}")]
    Divergence { time: f64, norm: f64, limit: f64 },

    #[error("no convergence after {iterations} iterations: {reason}")]
    Convergence { iterations: usize, reason: String },

    #[error("ill-conditioned observability (lambda_min estimate {lambda_min:.3e}): {reason}")]
    IllConditioned { lambda_min: f64, reason: String },

    #[error("inconclusive decay: {0}")]
    InconclusiveDecay(String),

    #[error("small-data violation: {0}")]
    SmallDataViolation(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag, used in serialized failure reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Domain(_) => "domain",
            Error::Resolution(_) => "resolution",
            Error::Divergence { .. } => "divergence",
            Error::Convergence { .. } => "convergence",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::InconclusiveDecay(_) => "inconclusive_decay",
            Error::SmallDataViolation(_) => "small_data_violation",
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
