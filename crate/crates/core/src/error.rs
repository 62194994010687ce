use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("duplicate annotation for instance {instance} at frame {frame}")]
    DuplicateAnnotation { instance: String, frame: u32 },

    #[error("{count} schema violation(s) in annotation input:\n{details}")]
    Schema { count: usize, details: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("output path already exists: {}", .0.display())]
    Collision(PathBuf),

    #[error("empty trajectory for object {0}")]
    EmptyTrajectory(String),

    #[error("frame {frame} out of range 1..={frame_count}")]
    FrameOutOfRange { frame: u32, frame_count: u32 },

    #[error("length mismatch for {name}: {left} vs {right}")]
    LengthMismatch {
        name: String,
        left: usize,
        right: usize,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// True for errors caused by malformed input data rather than the environment.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Collision(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
