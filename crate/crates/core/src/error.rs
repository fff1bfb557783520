//! Crate-wide error type and exit-code mapping for the CLI.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (CLI exit code 2).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Dataset layout, parsing, or file-format problems (CLI exit code 3).
    #[error("data error: {0}")]
    Data(String),

    /// A mapped class matched no files on disk.
    #[error("no files found for class '{class}' (pattern '{pattern}' under {root})")]
    ClassFilesMissing {
        class: String,
        pattern: String,
        root: PathBuf,
    },

    /// Malformed CSV cell, pinned to its source location.
    #[error("{file}:{line}: {message}")]
    CsvField {
        file: PathBuf,
        line: u64,
        message: String,
    },

    /// Shape disagreement between tensors, layers, or label vectors.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Corrupt or incompatible model/cache file.
    #[error("bad file format at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Training produced a non-finite loss (CLI exit code 4).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 2,
            Error::Numeric(_) => 4,
            _ => 3,
        }
    }
}
