use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction vector is not unit length (norm {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("propagation distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("user position coincides with the base station")]
    CoincidentPositions,

    #[error("unknown setup `{0}` (expected high_ici or medium_ici)")]
    UnknownSetup(String),

    #[error("lattice size {0} is not supported (expected 3, 6, 10 or 15)")]
    UnsupportedLatticeSize(usize),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("golden case is missing field `{0}`")]
    MissingField(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }
}
