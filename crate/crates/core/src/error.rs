use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data violated an invariant of the type being built.
    #[error("validation error: {0}")]
    Validation(String),
    /// A group identifier was not found.
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    /// The request exceeds what the implementation supports (e.g. too many groups for the oracle).
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
