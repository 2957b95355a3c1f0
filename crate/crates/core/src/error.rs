use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed version string `{0}`")]
    MalformedVersion(String),

    #[error("CVSS inputs must be finite and non-negative")]
    NegativeInput,

    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),

    #[error("unknown CVE `{0}`")]
    UnknownCve(String),

    #[error("no such path: {}", .0.display())]
    NoSuchPath(PathBuf),

    #[error("{}:{line}: {message}", .file.display())]
    KnowledgeBase {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: {message}", .file.display())]
    Manifest {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus has no scorable entries")]
    EmptyCorpus,

    #[error("{}: {source}", .path.display())]
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
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// 1-based line number of a byte offset within `text`.
pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    let end = offset.min(text.len());
    text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
}
