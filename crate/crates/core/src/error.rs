use thiserror::Error;

/// Failures reported by the library. Not-found outcomes of searches are
/// returned as values, not errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("singular sequence: smallest Gram eigenvalue {min_eigenvalue:e}")]
    Singular { min_eigenvalue: f64 },
    #[error("rejection sampling exhausted after {tries} tries ({accepted} accepted)")]
    RejectionExhausted { tries: u64, accepted: u64 },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
