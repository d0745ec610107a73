use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("unknown layer `{name}` (valid: {})", valid.join(", "))]
    UnknownLayer { name: String, valid: Vec<String> },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(String),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Manifest(#[from] ManifestError),

    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: need {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("shape mismatch for `{name}`: header says {found:?}, architecture needs {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest not found: {0}")]
    Missing(PathBuf),
    #[error("bad manifest header {found:?}: expected image_path,label[,subject_id]")]
    BadHeader { found: Vec<String> },
    #[error("line {line}: label `{value}` is not 0 (female) or 1 (male)")]
    BadLabel { line: u64, value: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
}
