use thiserror::Error;

/// Exit status for successful runs.
pub const EXIT_OK: i32 = 0;
/// Exit status when a verification check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for unreadable or invalid input.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{path}: {message}")]
    File { path: String, message: String },

    #[error(transparent)]
    Core(#[from] advmdp::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed { .. } => EXIT_CHECK_FAILED,
            _ => EXIT_INPUT,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
