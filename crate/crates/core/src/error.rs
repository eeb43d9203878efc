use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Non-finite values, empty inputs, out-of-range parameters.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A learner or the harness detected that the weight-update system blew up.
    #[error("divergence at step {step}: {reason}")]
    Divergence { step: u64, reason: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid spec `{spec}`: {reason}")]
    Spec { spec: String, reason: String },

    #[error("line {line}: {reason}")]
    Data { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn spec(spec: &str, reason: impl Into<String>) -> Self {
        Error::Spec {
            spec: spec.to_string(),
            reason: reason.into(),
        }
    }
}
