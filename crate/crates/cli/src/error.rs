use thiserror::Error;
use xmmd_harness::HarnessError;

/// Failures mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Other(_) => 1,
        }
    }
}

impl From<xmmd_core::Error> for CliError {
    fn from(e: xmmd_core::Error) -> Self {
        match e {
            xmmd_core::Error::InvalidSpec(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Core(inner) => inner.into(),
            HarnessError::InvalidSpec(msg) => Self::Usage(msg),
            other => Self::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Other(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
