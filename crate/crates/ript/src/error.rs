//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tensor operations, the solver, I/O and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Array or image dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input contains NaN or infinite values where finite data is required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The image file decoded correctly but is not a supported grayscale format.
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    /// A file failed to parse (image header, config, truth JSON, ...).
    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    /// Underlying I/O error.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for a [`Error::Malformed`] with owned strings.
    pub fn malformed(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.into(),
            reason: reason.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
