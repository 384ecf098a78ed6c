use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Any other numerical failure while running the experiment.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

/// One-line JSON written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub status: &'static str,
    pub kind: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<&'a str>,
    pub message: String,
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::NonConvergence(_) | CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn record(&self) -> ErrorRecord<'_> {
        let (kind, field) = match self {
            CliError::Config { field, .. } => ("config", Some(field.as_str())),
            CliError::NonConvergence(_) => ("non-convergence", None),
            CliError::Numerical(_) => ("numerical", None),
            CliError::Io { .. } => ("io", None),
        };
        ErrorRecord {
            status: "error",
            kind,
            exit_code: self.exit_code(),
            field,
            message: self.to_string(),
        }
    }
}

impl From<ridgeless::Error> for CliError {
    fn from(e: ridgeless::Error) -> Self {
        match e {
            ridgeless::Error::NonConvergence(_) => CliError::NonConvergence(e.to_string()),
            ridgeless::Error::Configuration(m) => CliError::Config {
                field: "solver".into(),
                message: m,
            },
            other => CliError::Numerical(other.to_string()),
        }
    }
}
