use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] goalrate::Error),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 for failed checks, 2 for anything that stops a run from starting or
    /// finishing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            _ => 2,
        }
    }
}
