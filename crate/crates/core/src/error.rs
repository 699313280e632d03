use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by generation, rendering, measurement and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient distribution is degenerate ({retained} retained responses)")]
    DegenerateDistribution { retained: usize },

    #[error("fractal dimension undefined: image has no foreground pixels")]
    UndefinedDimension,

    #[error("image is {width}x{height}, expected {expected_width}x{expected_height}")]
    Dimension {
        width: u32,
        height: u32,
        expected_width: u32,
        expected_height: u32,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("lookup table not found at {0}; run `sweep` and `build-table` first")]
    MissingTable(PathBuf),

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

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
