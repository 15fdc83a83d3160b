use corescale::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("omega cross-check failed: {0}")]
    CrossCheck(String),

    #[error(transparent)]
    Model(#[from] corescale::Error),
}

impl CliError {
    /// 2 for bad input, 3 for a violated model assumption, 4 for a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::GridMismatch(_) => 2,
            CliError::CrossCheck(_) => 4,
            CliError::Model(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Model => 3,
                ErrorClass::Numerical => 4,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
