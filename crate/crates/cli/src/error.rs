use centralizer_core::Error as CoreError;

/// Failures of a run, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit status 2: the config or arguments are unusable.
    #[error("validation error: {0}")]
    Validation(String),
    /// Exit status 3: the computation itself failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DimensionMismatch { .. }
            | CoreError::UnsupportedDimension(_)
            | CoreError::InvalidArgument(_)
            | CoreError::Precondition(_)
            | CoreError::GridMismatch(_)
            | CoreError::FiberMismatch
            | CoreError::NotCommuting(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("config: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
