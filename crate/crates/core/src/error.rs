use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument or configuration value was violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at byte offset {offset}: {reason}")]
    Parse { offset: u64, reason: String },

    #[error("truncated payload at byte offset {offset}: expected {expected} bytes, found {actual}")]
    Truncated { offset: u64, expected: u64, actual: u64 },

    #[error("ambiguous boundary: expected exactly one threshold crossing, found {crossings}")]
    Ambiguous { crossings: usize },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
