use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("speakers {0:?} were seen in training; verification needs unseen speakers")]
    SpeakerOverlap(Vec<u32>),

    #[error("{0}")]
    Locked(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable reason code, used as the prefix of CLI failures.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Shape(_) => "shape",
            Error::InvalidBatch(_) => "invalid-batch",
            Error::InvalidLabel(_) => "invalid-label",
            Error::InvalidInput(_) => "invalid-input",
            Error::Format { .. } => "format",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Diverged(_) => "diverged",
            Error::SpeakerOverlap(_) => "speaker-overlap",
            Error::Locked(_) => "locked",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
