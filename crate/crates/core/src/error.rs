use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("input domain error: {0}")]
    Domain(String),

    /// A requested size exceeds a configured limit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// A patch or section that does not exist was requested.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Array lengths or layouts do not agree.
    #[error("shape error: {0}")]
    Shape(String),

    /// An external denoiser failed.
    #[error("denoiser plugin error: {message}")]
    Plugin {
        message: String,
        status: Option<i32>,
        stderr: String,
    },

    /// The solver produced a non-finite iterate.
    #[error("solver diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    /// A file could not be parsed.
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Resource(_) => "resource",
            Error::Lookup(_) => "lookup",
            Error::Shape(_) => "shape",
            Error::Plugin { .. } => "plugin",
            Error::Divergence { .. } => "divergence",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Image(_) => "image",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
