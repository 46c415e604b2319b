use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI run, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] torus_lqg::Error),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error("{failed} acceptance check(s) failed")]
    Acceptance { failed: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 1 for validation and usage errors, 2 for numeric failures, 3 for
    /// failed acceptance checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(torus_lqg::Error::NonConvergence { .. } | torus_lqg::Error::TruncationTooTight { .. }) => 2,
            Self::Acceptance { .. } => 3,
            Self::Format(_) => 2,
            _ => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Format(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Format(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
