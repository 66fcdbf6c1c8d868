use std::fmt;

/// Failure of a subcommand, mapped to the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Replay found a difference (exit 1).
    Diff(String),
    /// Bad or missing arguments (exit 2).
    Usage(String),
    /// I/O or validation failure (exit 3).
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Diff(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Diff(m) => write!(f, "difference: {m}"),
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<qmrisim::Error> for CliError {
    fn from(e: qmrisim::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn failed(msg: impl Into<String>) -> CliError {
    CliError::Failed(msg.into())
}
