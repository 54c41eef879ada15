use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing {what} artifact: {}", path.display())]
    MissingArtifact { what: &'static str, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] riskflow_core::Error),
    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    /// Stable machine-readable kind for the error line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingArtifact { .. } => "missing_artifact",
            CliError::Io { .. } => "io",
            CliError::Core(riskflow_core::Error::Io(_)) => "io",
            CliError::Core(_) => "data",
            CliError::Serialize(_) => "serialization",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
