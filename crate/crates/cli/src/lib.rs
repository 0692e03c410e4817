//! Command-line front end for `invfeas-core`: TOML configuration, CSV
//! output, and the check suites run by `invfeas verify`.

pub mod commands;
pub mod config;
pub mod instances;
pub mod oracle;
pub mod table;
pub mod verify;

use invfeas_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    /// 1 verify failure, 2 usage or configuration, 3 solver not converged,
    /// 4 non-finite simulation state, 5 file i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core(CoreError::NotConverged(_)) => 3,
            CliError::Core(CoreError::NonFinite { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Io(_) => 5,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
