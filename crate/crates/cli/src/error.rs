use std::path::{Path, PathBuf};

/// Failures surfaced by the command line, each tied to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing, unreadable or malformed input data.
    #[error("bad input {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    /// Invalid configuration file or flag values.
    #[error("bad config: {0}")]
    Config(String),
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: trendcause_core::Error,
    },
    #[error("chart: {0}")]
    Chart(#[from] crate::chart::ChartError),
    #[error("cannot write {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { .. } | CliError::Chart(_) | CliError::Output { .. } => 1,
            CliError::Input { .. } => 2,
            CliError::Config(_) => 3,
        }
    }

    pub fn input(path: &Path, reason: impl ToString) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    pub fn output(path: &Path, reason: impl ToString) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    /// Wraps a core error raised while running `stage`. Parameter errors are
    /// configuration problems; everything else is a stage failure.
    pub fn stage(stage: &str) -> impl FnOnce(trendcause_core::Error) -> Self + '_ {
        move |e| match e {
            trendcause_core::Error::InvalidParameter(msg) => CliError::Config(format!("{stage}: {msg}")),
            source => CliError::Stage {
                stage: stage.to_string(),
                source,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
