use std::path::PathBuf;

use asep2d_core::error::{ExactError, FourierError, KernelError, ObservableError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        #[source]
        source: asep2d_core::Error,
    },
    #[error("checks above tolerance: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::Io { .. } => "Io",
            CliError::Core { source, .. } => source.kind(),
            CliError::CheckFailed(_) => "CheckFailed",
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// One-line JSON error record.
    pub fn record(&self, command: &str) -> String {
        serde_json::json!({
            "status": "error",
            "command": command,
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

/// Attaches a short context string to a core error.
pub trait Context<T> {
    fn context(self, context: &'static str) -> Result<T, CliError>;
}

macro_rules! core_context {
    ($($e:ty),*) => {$(
        impl<T> Context<T> for Result<T, $e> {
            fn context(self, context: &'static str) -> Result<T, CliError> {
                self.map_err(|e| CliError::Core { context, source: e.into() })
            }
        }
    )*};
}

core_context!(asep2d_core::Error, KernelError, SimError, ObservableError, ExactError, FourierError);
