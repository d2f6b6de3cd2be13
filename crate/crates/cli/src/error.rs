use std::fmt;

use vesselfuse::Error as CoreError;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or argument combinations.
    Usage(String),
    /// Unreadable, malformed or inconsistent input data.
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "data error: {e:#}"),
            CliError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Serde(_) => CliError::Internal(e.into()),
            other => CliError::Data(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<CoreError>() {
            Ok(core) => core.into(),
            Err(e) if e.downcast_ref::<std::io::Error>().is_some() => CliError::Data(e),
            Err(e) => CliError::Internal(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches file context to core errors while keeping their exit class.
pub trait Context<T> {
    fn context_path(self, what: &str, path: &std::path::Path) -> CliResult<T>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context_path(self, what: &str, path: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| {
            let code = CliError::from(e);
            match code {
                CliError::Data(e) => CliError::Data(e.context(format!("{what} {}", path.display()))),
                CliError::Internal(e) => CliError::Internal(e.context(format!("{what} {}", path.display()))),
                u => u,
            }
        })
    }
}
