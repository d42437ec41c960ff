use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("frame {frame}: dimensions {got_width}x{got_height} differ from {width}x{height}")]
    FrameDimensionMismatch {
        frame: usize,
        width: usize,
        height: usize,
        got_width: usize,
        got_height: usize,
    },

    #[error("frame {frame}: unsupported pixel format {format}")]
    UnsupportedPixelFormat { frame: usize, format: String },

    #[error("frame {frame}: {message}")]
    Decode { frame: usize, message: String },

    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },

    #[error("invalid clip: {0}")]
    InvalidClip(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("volume {dims:?} too small: {message}")]
    VolumeTooSmall {
        dims: (usize, usize, usize),
        message: String,
    },

    #[error("point ({x}, {y}, {t}) lies outside the clip")]
    PointOutsideClip { x: usize, y: usize, t: usize },

    #[error("patch geometry has an empty cell along {axis}")]
    EmptyCell { axis: char },

    #[error("descriptor kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    #[error("need at least {needed} descriptors, stream had {got}")]
    NotEnoughDescriptors { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training set for {0} has a single class")]
    SingleClass(String),

    #[error("class {0} has no samples")]
    EmptyClass(String),

    #[error("stage {stage} failed{}: {source}", clip.as_ref().map(|c| format!(" on clip {c}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        clip: Option<String>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn malformed(what: &'static str, message: impl Into<String>) -> Self {
        Error::Malformed {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, clip: Option<&str>) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                clip: clip.map(str::to_owned),
                source: Box::new(e),
            },
        }
    }
}
