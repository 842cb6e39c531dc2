use std::path::PathBuf;

use crate::model::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("dataset failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("matrix not positive definite after jitter up to {max_jitter:e} ({context})")]
    NotPositiveDefinite { context: String, max_jitter: f64 },

    #[error("linear predictor cache drifted by {drift:e}")]
    EtaDrift { drift: f64 },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
