use std::path::PathBuf;

use crate::clips::ExcitationConfig;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// No relevant hyperedge leaves this configuration.
    #[error("dead end at configuration {0:?}")]
    DeadEnd(ExcitationConfig),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("walk of length {length} exceeds the {bias} bound {bound}")]
    BoundViolation { bias: String, length: usize, bound: u128 },

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
