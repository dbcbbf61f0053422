use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic {found:?}, expected \"SPFV\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported container version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("unknown dtype code {0}")]
    UnknownDtype(u32),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("missing slice file {}", .0.display())]
    MissingSlice(PathBuf),

    #[error("slice {} is {found_w}x{found_h}, expected {expected_w}x{expected_h}", path.display())]
    SliceDimensions {
        path: PathBuf,
        found_w: u32,
        found_h: u32,
        expected_w: u32,
        expected_h: u32,
    },

    #[error("slice {}: {reason}", path.display())]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("frame index {t} out of range (volume has {frames} frames)")]
    FrameOutOfRange { t: usize, frames: usize },

    #[error("median window entries must be odd and >= 1, got {0:?}")]
    EvenWindow([usize; 3]),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
