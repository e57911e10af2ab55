//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter values (chirp setup, segment counts, selectors, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Mismatched lengths between related sequences.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// An index outside its valid range.
    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// A receiver position outside the scene grid.
    #[error("position outside scene bounds: ({0}, {1}) m")]
    OutOfBounds(f64, f64),

    /// A capture that carries no signal at all (all-zero samples).
    #[error("capture contains no signal")]
    NoSignal,

    /// A beamspace map was requested from an incomplete Rx sweep.
    #[error("incomplete Rx sweep, missing beams {0:?}")]
    PartialMap(Vec<usize>),

    /// Malformed on-disk data (bad magic, version, truncation).
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
