use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    /// Settings that are valid alone but unusable for the requested run.
    #[error("{0}")]
    Setup(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Numerical(#[from] gplvm_core::Error),
    #[error("rerun does not reproduce the recorded scores: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn config(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 2 usage, 3 configuration or precondition,
    /// 4 input/output, 5 numerical failure, 6 failed reproduction.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config { .. } | CliError::Setup(_) => 3,
            CliError::Io { .. } | CliError::Format { .. } => 4,
            CliError::Numerical(e) => match e {
                gplvm_core::Error::Precondition(_) | gplvm_core::Error::InvalidInput(_) => 3,
                gplvm_core::Error::DimensionMismatch { .. } => 4,
                _ => 5,
            },
            CliError::Mismatch(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
