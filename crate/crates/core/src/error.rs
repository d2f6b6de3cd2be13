use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("NIfTI error on {path}: {source}")]
    Nifti {
        path: PathBuf,
        #[source]
        source: nifti::NiftiError,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path} is a 4D volume with {channels} channels; use read_hypervolume")]
    Unexpected4D { path: PathBuf, channels: usize },

    #[error("{path} is not a 4D volume (dim[0] = {rank}); use read_volume")]
    NotHyperVolume { path: PathBuf, rank: usize },

    #[error("volume contains {count} non-finite voxel value(s)")]
    NonFinite { count: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("volume too small: {0}")]
    TooSmall(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("filter {filter} failed: {source}")]
    Filter {
        filter: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
