use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown {kind} name `{name}`")]
    UnknownName { kind: NameKind, name: String },

    #[error("{what} = {value} is outside {range}")]
    Range {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("{kind} id {id} out of range (size {size})")]
    Index {
        kind: NameKind,
        id: usize,
        size: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },

    #[error("bad checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameKind {
    Entity,
    Relation,
    Type,
}

impl std::fmt::Display for NameKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NameKind::Entity => "entity",
            NameKind::Relation => "relation",
            NameKind::Type => "type",
        })
    }
}

pub type Result<T, E = KgError> = std::result::Result<T, E>;

impl KgError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        KgError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn argument(message: impl Into<String>) -> Self {
        KgError::Argument(message.into())
    }
}
