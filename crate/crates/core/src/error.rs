use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: value out of range: {detail}")]
    Range { op: &'static str, detail: String },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("parameter `{0}` has no gradient; run backward before stepping")]
    MissingGrad(String),

    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Empty(String),

    #[error("{what}: need at least {need} samples, got {got}")]
    TooFew { what: &'static str, got: usize, need: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{}: bad magic, not an HSAW blob", path.display())]
    BadMagic { path: PathBuf },

    #[error("{}: unsupported format version {found} (this build reads version {expected}); re-export the artifact with a matching release", path.display())]
    Version { path: PathBuf, found: u32, expected: u32 },

    #[error("{}: payload length mismatch: {detail}", path.display())]
    PayloadLength { path: PathBuf, detail: String },

    #[error("{}: inconsistent artifact: {detail}", path.display())]
    Inconsistent { path: PathBuf, detail: String },

    #[error("{}: malformed manifest: {detail}", path.display())]
    Manifest { path: PathBuf, detail: String },

    #[error("missing blob for parameter `{name}` (expected {})", path.display())]
    MissingBlob { name: String, path: PathBuf },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
