use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },

    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall { width: u32, height: u32, window: u32 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid box [{x0}, {y0}, {x1}, {y1}]")]
    InvalidBox { x0: i32, y0: i32, x1: i32, y1: i32 },

    #[error("layer {width}x{height} does not fit on {canvas_w}x{canvas_h} canvas")]
    LayerTooLarge {
        width: u32,
        height: u32,
        canvas_w: u32,
        canvas_h: u32,
    },

    #[error("empty asset pool ({0})")]
    EmptyPool(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("score {value} for {criterion} outside [1, 5]")]
    ScoreOutOfRange { criterion: &'static str, value: f64 },

    #[error("failed to parse detector output: {reason}")]
    DetectorOutput { reason: String, raw: String },

    #[error("refiner request to {endpoint} failed after {attempts} attempt(s): {last_error}")]
    Refiner {
        endpoint: String,
        attempts: u32,
        last_error: String,
    },

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

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
