use std::path::PathBuf;

/// Errors produced by the purification library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("image is {image_height}x{image_width} but mask is {mask_height}x{mask_width}")]
    PairMismatch {
        image_height: usize,
        image_width: usize,
        mask_height: usize,
        mask_width: usize,
    },

    #[error("mask label {0} is not covered by the channel map")]
    UnknownLabel(u32),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("weights format error: {0}")]
    Format(String),

    #[error("{height}x{width} input is not divisible by {divisor}")]
    IndivisibleDims {
        height: usize,
        width: usize,
        divisor: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("objective is not finite (last good iteration {last_good_iteration})")]
    NonFiniteLoss { last_good_iteration: usize },

    #[error("line search failed after {0} backtracks")]
    LineSearchFailed(usize),

    #[error("mask channel {0} has zero mass")]
    EmptyRegion(usize),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
