use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::{BoundingBox, ImageSize};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: width and height must be >= 1 (got {w}x{h})")]
    EmptyBox { w: i64, h: i64 },

    #[error("box {bbox:?} lies entirely outside the {bounds} image")]
    BoxOutsideImage { bbox: BoundingBox, bounds: ImageSize },

    #[error("offset must be even and non-negative, got {0}")]
    OddOffset(u32),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: ImageSize, actual: ImageSize },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }

    pub(crate) fn backend(backend: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Backend { backend: backend.into(), message: message.into() }
    }
}
