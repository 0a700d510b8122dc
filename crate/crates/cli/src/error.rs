use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit status.
pub mod exit {
    pub const OK: i32 = 0;
    pub const NOT_USABLE: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("{path}: {inner}")]
    InFile { path: PathBuf, inner: Box<CliError> },
    #[error(transparent)]
    Core(#[from] cryoamp::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(line: usize, reason: impl Into<String>) -> Self {
        Self::Config { line, reason: reason.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn in_file(self, path: &Path) -> Self {
        Self::InFile { path: path.to_path_buf(), inner: Box::new(self) }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Config { .. } | Self::Usage(_) => exit::INPUT,
            Self::InFile { inner, .. } => inner.exit_code(),
            Self::Core(e) if e.is_input_error() => exit::INPUT,
            Self::Core(_) => exit::NUMERICAL,
        }
    }
}
