//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by generation, featurization, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// No base-function row survives the include/exclude tag filters.
    #[error("no base function matches the tag filters")]
    FilterEmpty,

    /// A constrained base-function draw could not be satisfied.
    #[error("could not satisfy base-function constraint within {attempts} draws")]
    RetryExhausted { attempts: usize },

    /// The normalization constant vanished or overflowed.
    #[error("degenerate pdf: normalization constant {z} is unusable")]
    DegeneratePdf { z: f64 },

    /// Rejection sampling accepted too few proposals to be practical.
    #[error("rejection sampler acceptance rate {rate:.3e} below 1e-4 after {proposals} proposals")]
    LowAcceptance { rate: f64, proposals: u64 },

    /// A query has fewer non-identical candidate points than requested neighbors.
    #[error("insufficient points for k-NN: needed {needed}, available {available}")]
    InsufficientPoints { needed: usize, available: usize },

    /// Input width does not match what the model or operation expects.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// Training loss became NaN or infinite.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// Every ensemble member diverged before producing a usable checkpoint.
    #[error("all {members} ensemble members diverged")]
    AllDiverged { members: usize },

    /// A sample is unusable for bandwidth selection (too small or zero spread).
    #[error("degenerate sample: {reason}")]
    DegenerateSample { reason: String },

    /// Paired vectors have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// An empty sample where at least one observation is required.
    #[error("empty sample")]
    EmptySample,

    /// A density estimate carries no mass on the evaluation grid.
    #[error("estimate is zero everywhere on the sampling grid")]
    AllZero,

    /// Malformed dataset, model or sample file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
