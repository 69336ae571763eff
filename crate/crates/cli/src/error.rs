//! Failure classification: every error carries the process exit code it maps to.

use thiserror::Error;

/// Exit code 1: the command line itself was wrong.
pub const EXIT_USAGE: i32 = 1;
/// Exit code 2: the configuration or a referenced file was unusable.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code 3: the work itself failed.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Config(_) => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Library errors surfacing outside the configuration stage are runtime
/// failures; configuration loading maps them to [`CliError::Config`]
/// explicitly where they mean "your file is wrong".
impl From<govlab::Error> for CliError {
    fn from(e: govlab::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
