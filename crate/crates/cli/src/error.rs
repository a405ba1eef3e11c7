use std::path::PathBuf;

use thiserror::Error;

/// Exit status for bad input.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for failures of the numerics.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for I/O and serialization trouble.
pub const EXIT_IO: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: ksd_core::Error,
    },
    #[error("stage {stage} failed its checks: {message}")]
    Check { stage: &'static str, message: String },
    #[error("profile cache {path} is unusable: {message}")]
    Cache { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn stage(stage: &'static str, e: impl Into<ksd_core::Error>) -> Self {
        CliError::Stage { stage, source: e.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse { .. } | CliError::Config(_) => EXIT_VALIDATION,
            CliError::Stage { source, .. } if source.is_validation() => EXIT_VALIDATION,
            CliError::Stage { .. } | CliError::Check { .. } => EXIT_NUMERICAL,
            CliError::Cache { .. } | CliError::Io { .. } | CliError::Serialize(_) => EXIT_IO,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}
