use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] mevrate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// 2 for config problems, 3 for violated preconditions, 4 for an
    /// exhausted search, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Library(mevrate::Error::Argument(_)) => 2,
            CliError::Library(mevrate::Error::Precondition(_)) | CliError::Library(mevrate::Error::Domain(_)) => 3,
            CliError::Library(mevrate::Error::SearchExhausted(_)) => 4,
            _ => 1,
        }
    }
}
