use std::fmt::Display;

/// A failed command. The variant decides the exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration; nothing was done. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The command ran and something went wrong. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn usage(msg: impl Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn runtime(msg: impl Display) -> Self {
        CliError::Runtime(msg.to_string())
    }
}

impl From<layerforge::Error> for CliError {
    fn from(e: layerforge::Error) -> Self {
        match e {
            layerforge::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
