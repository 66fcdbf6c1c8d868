//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Voxel index triple `(x, y, z)`.
pub type Index3 = [usize; 3];

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("data length {actual} does not match grid with {expected} voxels")]
    DataLength { expected: usize, actual: usize },

    #[error("mask volume contains non-binary value {value} at voxel {index:?}")]
    NonBinary { index: Index3, value: f32 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{map} has non-positive value {value} at voxel {index:?}")]
    NonPositiveRate {
        map: &'static str,
        index: Index3,
        value: f32,
    },

    #[error("mt value {value} at voxel {index:?} is outside [0, 1)")]
    MtOutOfRange { index: Index3, value: f64 },

    #[error("pd has negative value {value} at voxel {index:?}")]
    NegativePd { index: Index3, value: f32 },

    #[error("b1 has non-positive value {value} at voxel {index:?}")]
    NonPositiveB1 { index: Index3, value: f32 },

    #[error("region origin {origin:?} size {size:?} exceeds shape {shape:?}")]
    OutOfBounds {
        origin: Index3,
        size: Index3,
        shape: Index3,
    },

    #[error("expected {expected} sequence parameters, got {actual}")]
    WrongSequenceKind {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid sequence parameter: {0}")]
    InvalidSequence(String),

    #[error("invalid sampling range: {0}")]
    InvalidRange(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("crop {crop:?} does not fit in shape {shape:?}")]
    CropTooLarge { crop: Index3, shape: Index3 },

    #[error("embedding batch: {0}")]
    InvalidBatch(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("unsupported manifest schema version {found} (supported: {supported})")]
    SchemaMismatch { found: u32, supported: u32 },

    #[error("manifest references unknown source map set {0:?}")]
    MissingSource(String),

    #[error("missing required map {name:?} in {dir}")]
    MissingMap { name: &'static str, dir: PathBuf },

    #[error("malformed NIfTI file: {0}")]
    Malformed(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("unsupported dimensionality: {0}")]
    UnsupportedDims(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
