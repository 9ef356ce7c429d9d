use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("duplicate asset id `{0}`")]
    DuplicateAsset(String),

    #[error("unknown asset id `{0}`")]
    UnknownAsset(String),

    #[error("catalog has {available} {kind} asset(s), need at least {required}")]
    NotEnoughAssets {
        kind: &'static str,
        available: usize,
        required: usize,
    },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },

    #[error("mask has no foreground pixel")]
    EmptyMask,

    #[error("placement `{0}` lies entirely off the canvas")]
    OffCanvas(String),

    #[error("canvas too crowded: no valid position for placement {index} after {attempts} attempts")]
    CanvasTooCrowded { index: usize, attempts: usize },

    #[error("transformed raster would be {width}x{height}, limit is {limit} per side")]
    RasterTooLarge { width: u64, height: u64, limit: u32 },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("palette has {available} colors, scene needs {required}")]
    PaletteTooSmall { available: usize, required: usize },

    #[error("degenerate box after clipping")]
    DegenerateBox,

    #[error("invalid drag: {0}")]
    InvalidDrag(String),

    #[error("cannot parse drag instruction: {0}")]
    DragParse(String),

    #[error("word list is empty")]
    EmptyWordList,

    #[error("no glyph font available")]
    NoFont,

    #[error("transform did not fit on canvas after {0} attempts")]
    TransformRetriesExhausted(usize),

    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },

    #[error("manifest error in {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
