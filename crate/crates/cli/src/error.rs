use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or argument combinations; exit status 2.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] cqcim::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}
