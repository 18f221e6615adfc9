use std::path::PathBuf;

use thiserror::Error;

/// Failures after argument parsing; all map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] flimdeconv::Error),
    #[error("{}: {1}", .0.display())]
    Path(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("replay does not reproduce the recorded outputs:\n  {}", .0.join("\n  "))]
    Mismatch(Vec<String>),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invalid(msg.into()))
}
