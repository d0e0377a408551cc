use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Library(#[from] igcp::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 1 verification failure, 2 invalid input, 3 budget exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Library(igcp::Error::Budget { .. }) | CliError::Library(igcp::Error::Truncation { .. }) => 3,
            CliError::Library(_) | CliError::Input(_) | CliError::Io(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "verification_failure",
            3 => "budget_exceeded",
            _ => "invalid_input",
        }
    }
}
