use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("degenerate homography after {attempts} attempts (|det| <= 1e-8)")]
    DegenerateHomography { attempts: usize },

    #[error("projective denominator vanishes at pixel ({col}, {row})")]
    DegenerateProjection { col: usize, row: usize },

    #[error("polygon hull degenerated after {attempts} attempts")]
    DegeneratePolygon { attempts: usize },

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("validation failure: {0}")]
    Validation(String),

    #[error("bad .flo magic: expected 202021.25, found {found}")]
    FloMagic { found: f32 },

    #[error("bad .flo length: header claims {width}x{height} ({expected} payload bytes), found {found}")]
    FloLength {
        width: i32,
        height: i32,
        expected: usize,
        found: usize,
    },

    #[error("source image store is empty: {0}")]
    EmptyStore(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{0}: {1}")]
    Json(PathBuf, #[source] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_layer(self, layer: usize) -> Self {
        Error::Layer {
            layer,
            source: Box::new(self),
        }
    }

    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
