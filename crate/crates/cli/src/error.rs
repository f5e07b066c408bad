use thiserror::Error;

/// Failures of a CLI command, each with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<uijepa_core::Error> for CliError {
    fn from(e: uijepa_core::Error) -> Self {
        use uijepa_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Contract(_) => CliError::Config(msg),
            E::NonFinite(_) => CliError::Numeric(msg),
            E::Data(_) | E::Format(_) | E::Io { .. } | E::Json(_) => CliError::Data(msg),
            E::Shape { .. } => CliError::Internal(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
