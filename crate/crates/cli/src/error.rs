use std::path::Path;

use lachesis_core::Error as CoreError;
use thiserror::Error;

/// Errors reported by the command-line driver, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input data (exit 1).
    #[error("{0}")]
    Data(String),

    /// Bad flags or configuration (exit 2).
    #[error("{0}")]
    Config(String),

    /// Numerical failure during training or checking (exit 3).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    pub fn with_path(self, path: &Path) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let message = err.to_string();
        let root = match &err {
            CoreError::InBug { source, .. } => source.as_ref(),
            e => e,
        };
        match root {
            CoreError::InvalidConfig(_)
            | CoreError::SchemeNotAllowed { .. }
            | CoreError::FoldCount { .. }
            | CoreError::PrefixOutOfRange { .. } => CliError::Config(message),
            CoreError::NonFiniteGradient(_) => CliError::Numeric(message),
            _ => CliError::Data(message),
        }
    }
}
