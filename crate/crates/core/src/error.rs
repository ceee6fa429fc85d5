use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("non-finite values in {context}")]
    NonFinite { context: String },

    #[error("acoustic tensor is singular for direction n = ({}, {})", n[0], n[1])]
    SingularAcousticTensor { n: [f64; 2] },

    /// Integration produced NaN/Inf. `magnitude` is the largest absolute
    /// value found in the offending state (infinite if any entry overflowed).
    #[error("integration blew up at frame {frame} (max |value| = {magnitude:e})")]
    Blowup { frame: usize, magnitude: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("truth trajectory required when data-loss weights are non-zero")]
    MissingTruth,

    #[error("instance (c0 = {c0}, seed = {seed}) failed: {source}")]
    Instance {
        c0: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while decoding a dataset file. Each corruption class gets its own
/// variant so callers can tell a truncated download from a flipped bit.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a dataset file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported format version {found_major}.{found_minor} (this reader supports {supported_major}.x)")]
    UnsupportedVersion {
        found_major: u16,
        found_minor: u16,
        supported_major: u16,
    },

    #[error("unsupported byte order marker {0:#010x}")]
    ByteOrder(u32),

    #[error("file truncated while reading {0}")]
    Truncated(String),

    #[error("header checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    HeaderChecksum { stored: u64, computed: u64 },

    #[error("checksum mismatch in instance {index} (c0 = {c0}, seed = {seed})")]
    InstanceChecksum { index: usize, c0: f64, seed: u64 },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}
