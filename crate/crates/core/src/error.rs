use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("source `{source_name}` has {available} pairs, too few for the requested split")]
    SourceTooSmall {
        source_name: String,
        available: usize,
    },

    #[error("unknown source id {0}")]
    UnknownSource(usize),

    #[error("operation requires a linear reward model")]
    NotLinear,

    #[error("zero rank variance: correlation undefined")]
    DegenerateRanks,

    #[error("pool has no ground-truth rewards")]
    MissingTrueRewards,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI on stderr.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::DimensionMismatch { .. } => "dimension",
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } => "numeric",
            Error::Empty(_) | Error::SourceTooSmall { .. } | Error::UnknownSource(_) => "data",
            Error::Parse { .. } | Error::Json(_) => "parse",
            Error::NotLinear | Error::DegenerateRanks | Error::MissingTrueRewards => "unsupported",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
