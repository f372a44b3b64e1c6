use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] morphforge_core::Error),
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("split: {0}")]
    Split(String),
    #[error("pairing: {0}")]
    Pairing(String),
    #[error("missing input {0}")]
    MissingInput(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
