use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("invalid subset view: {0}")]
    InvalidView(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("degenerate subset at level {level}: {size} samples selected, at least {min} required")]
    DegenerateSubset { level: usize, size: usize, min: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("manifest format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("digest mismatch for {what}: recorded {recorded}, computed {computed}")]
    DigestMismatch {
        what: String,
        recorded: String,
        computed: String,
    },

    #[error("corrupt manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit code for the command-line tool. Each error class gets
    /// its own code so scripted sweeps can tell them apart.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 1,
            Error::Config(_) | Error::Json(_) => 3,
            Error::Parse { .. } | Error::InvalidView(_) | Error::EmptyTrainingSet => 4,
            Error::DegenerateSubset { .. } => 5,
            Error::Io { .. } => 6,
            Error::VersionMismatch { .. } | Error::DigestMismatch { .. } | Error::Manifest(_) => 7,
        }
    }
}
