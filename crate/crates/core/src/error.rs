use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the construction is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A user-supplied function returned a non-finite value.
    #[error("non-finite value from {what} at {at}")]
    Evaluation { what: &'static str, at: String },

    #[error("integration failed at t = {t}: {reason} (accepted {accepted}, rejected {rejected} steps)")]
    Integration {
        t: f64,
        reason: String,
        accepted: usize,
        rejected: usize,
    },

    /// A stationary profile does not satisfy the equation it claims to solve.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("malformed permutation: {0}")]
    Permutation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
