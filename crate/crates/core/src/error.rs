use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the triage pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record without imports cannot participate in import-list keying.
    #[error("import list is empty")]
    NoImports,

    /// A qualification was applied to fingerprints from the wrong method.
    #[error("qualification {qualification} requires {expected} fingerprints")]
    QualificationMismatch {
        qualification: String,
        expected: String,
    },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
