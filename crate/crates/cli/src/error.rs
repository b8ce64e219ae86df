use std::path::{Path, PathBuf};

use aofm_core::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const IO: i32 = 4;
    pub const SYNC: i32 = 5;
    pub const DECODE: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: CoreError },
    #[error("sync: {0}")]
    Sync(String),
    #[error("decode: {failed} of {total} frames failed CRC")]
    Decode { failed: usize, total: usize },
    #[error("processing: {0}")]
    Processing(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Sync(_) => exit::SYNC,
            CliError::Decode { .. } | CliError::Processing(_) => exit::DECODE,
        }
    }

    pub fn io(path: &Path, source: impl Into<CoreError>) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source: source.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::MissingKey(_) | CoreError::UnknownKey(_) | CoreError::InvalidField { .. } | CoreError::Json(_) => {
                CliError::Config(e.to_string())
            }
            CoreError::SyncNotFound { .. } | CoreError::SignalTooShort { .. } => CliError::Sync(e.to_string()),
            CoreError::Io(_) | CoreError::BadHeader(_) | CoreError::Truncated { .. } => CliError::Io {
                path: PathBuf::new(),
                source: e,
            },
            other => CliError::Processing(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
