use std::fmt;

/// Process outcome contract: usage errors exit 1, verification failures
/// exit 2, I/O failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verify(String),
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Verify(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Verify(m) => write!(f, "verification failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<uwnet_tensor::Error> for CliError {
    fn from(e: uwnet_tensor::Error) -> Self {
        match &e {
            uwnet_tensor::Error::Io { .. } => CliError::Io(e.to_string()),
            uwnet_tensor::Error::Checkpoint(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<uwnet_data::Error> for CliError {
    fn from(e: uwnet_data::Error) -> Self {
        match &e {
            uwnet_data::Error::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
