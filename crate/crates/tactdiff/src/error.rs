use std::fmt::Display;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, missing inputs or invalid configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tactdiff_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Display) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }

    pub fn usage(msg: impl Display) -> Self {
        Self::Usage(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
