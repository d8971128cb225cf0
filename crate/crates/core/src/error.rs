use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A loss became NaN or infinite during training.
    #[error("training diverged at iteration {iteration}: {message}")]
    Divergence { iteration: usize, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Failure inside one stage of an experiment run.
    #[error("stage `{stage}` failed{}: {source}", sample.as_ref().map(|s| format!(" on sample {s}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        sample: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            other => Error::Image {
                path: path.into(),
                source: other,
            },
        }
    }

    pub fn in_stage(self, stage: &'static str, sample: Option<&str>) -> Self {
        Error::Stage {
            stage,
            sample: sample.map(str::to_owned),
            source: Box::new(self),
        }
    }
}
