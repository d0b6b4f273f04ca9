use std::fmt;

/// Failure of a command, carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config file. Exit code 2.
    Config(String),
    /// Unreadable or malformed data, or output that cannot be written. Exit code 3.
    Data(String),
    /// A model could not be trained. Exit code 4.
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Training(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Training(m) => write!(f, "training failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<castguard_core::Error> for CliError {
    fn from(e: castguard_core::Error) -> Self {
        let msg = e.to_string();
        if e.is_training_failure() {
            CliError::Training(msg)
        } else if e.is_data_error() || matches!(e, castguard_core::Error::DimensionMismatch { .. }) {
            CliError::Data(msg)
        } else {
            CliError::Config(msg)
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
