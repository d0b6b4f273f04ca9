use std::path::PathBuf;

/// Errors raised by castguard.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: not an FMX file")]
    NotFmx { path: PathBuf },

    #[error("{path}: truncated/corrupt FMX file ({detail})")]
    CorruptFmx { path: PathBuf, detail: String },

    #[error("{path}: {detail}")]
    Csv { path: PathBuf, detail: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("Newton iterations did not converge after {iterations} steps (gradient norm {gradient_norm:e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("ensemble member {index} failed: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model blob: {0}")]
    Codec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by fitting rather than by bad input or I/O.
    pub fn is_training_failure(&self) -> bool {
        match self {
            Error::DegenerateTrainingSet(_)
            | Error::NoConvergence { .. }
            | Error::TooLarge(_)
            | Error::Diverged { .. } => true,
            Error::Member { source, .. } => source.is_training_failure(),
            _ => false,
        }
    }

    /// True for errors about the contents or readability of data files.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::NotFmx { .. } | Error::CorruptFmx { .. } | Error::Csv { .. } | Error::Codec(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
