//! CLI error type mapped onto process exit codes.

use std::fmt;

/// Usage errors exit 1, data errors exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<vwt_core::Error> for CliError {
    fn from(e: vwt_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach the offending path to an IO error.
pub fn io_ctx(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
