//! Crate-wide error type.
//!
//! Variants are grouped by the exit-code classes the CLI reports:
//! usage (2), format (3), shape (4), numeric (5). `Error::exit_code`
//! performs that mapping; library callers just match on variants.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: not a VKT1 file")]
    BadMagic { path: PathBuf },

    #[error("{path}: size mismatch ({detail})")]
    SizeMismatch { path: PathBuf, detail: String },

    #[error("{path}: unsupported rank {rank}")]
    UnsupportedRank { path: PathBuf, rank: u8 },

    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("label {index} out of range (expected < {bound})")]
    LabelOutOfRange { index: usize, bound: usize },

    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),

    #[error("action class {class} has no samples (enable zero_fill to tolerate empty classes)")]
    EmptyClass { class: usize },

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code for this error: 2 usage, 3 format, 4 shape, 5 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. }
            | Error::BadMagic { .. }
            | Error::SizeMismatch { .. }
            | Error::UnsupportedRank { .. }
            | Error::Format { .. }
            | Error::InvalidConfig(_)
            | Error::DuplicateLabel(_)
            | Error::EmptyClass { .. }
            | Error::Other(_) => 3,
            Error::ShapeMismatch(_)
            | Error::LabelOutOfRange { .. }
            | Error::DegenerateBox(_) => 4,
            Error::NonFinite(_) => 5,
        }
    }

    /// Path associated with the error, when there is one.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Io { path, .. }
            | Error::BadMagic { path }
            | Error::SizeMismatch { path, .. }
            | Error::UnsupportedRank { path, .. }
            | Error::Format { path, .. } => Some(path),
            _ => None,
        }
    }
}
