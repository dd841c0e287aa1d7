//! Error type shared by every module of the crate.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("manifest validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("backend error: {0}")]
    Backend(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("probe error: {0}")]
    Probe(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error on {}: {source}", .path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Json(_) => ErrorClass::Config,
            Error::Data(_)
            | Error::Validation(_)
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Image { .. }
            | Error::Csv(_)
            | Error::Contract(_)
            | Error::Dimension(_) => ErrorClass::Data,
            Error::Context { source, .. } => source.class(),
            _ => ErrorClass::Runtime,
        }
    }
}
