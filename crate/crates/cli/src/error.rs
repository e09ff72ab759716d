use thiserror::Error;

use awd_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 1,
            CliError::Input(_) => 2,
            CliError::Assertion(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Solver(_) | CoreError::SizeExceeded { .. } | CoreError::NotCertifiable(_) => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("json error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
