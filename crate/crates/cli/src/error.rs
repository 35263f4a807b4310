use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(#[from] bqstab::BqError),

    #[error("{0} rows failed; see their status column")]
    FailedRows(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::FailedRows(_) | CliError::Io(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
