//! Crate-wide error type.
//!
//! Numerical routines here fail for structural reasons — shape mismatches,
//! degenerate inputs, infeasible geometry — rather than exceptional runtime
//! conditions, so every fallible operation returns [`Result`] with a variant
//! callers can match on programmatically.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A direction was required but the vector has zero Euclidean norm.
    #[error("degenerate vector: zero norm")]
    DegenerateVector,

    /// A latent row collapsed to zero norm, so its direction is undefined.
    #[error("degenerate latent: row {row} has zero norm")]
    DegenerateLatent { row: usize },

    #[error("need at least two clusters, got k = {k}")]
    TooFewClusters { k: usize },

    #[error("simplex infeasible: {k} equidistant unit vectors need dimension >= {min_dim}, got {d}")]
    SimplexInfeasible { k: usize, d: usize, min_dim: usize },

    #[error("same cluster: expected two distinct cluster indices, both are {index}")]
    SameCluster { index: usize },

    #[error("invalid cluster frequencies: {reason}")]
    InvalidFrequencies { reason: String },

    #[error("angle {theta} outside [0, pi]")]
    ThetaOutOfRange { theta: f64 },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    #[error("index {index} out of bounds for {len} instances")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("constraint joins an instance to itself (index {index})")]
    SelfPair { index: usize },

    #[error("duplicate constraint pair ({a}, {b})")]
    DuplicatePair { a: usize, b: usize },

    #[error("contradictory constraint pair ({a}, {b}): appears as both must-link and cannot-link")]
    ContradictoryPair { a: usize, b: usize },

    #[error("requested {requested} constraints but only {available} distinct pairs exist")]
    TooManyConstraints { requested: usize, available: usize },

    #[error("requested {needed} additional cross-cluster constraints but only {available} are available")]
    InsufficientCrossPairs { needed: usize, available: usize },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// Training produced a non-finite loss; the report up to this point is
    /// still meaningful, the index says which epoch went bad.
    #[error("diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("diverged: non-finite gradient at optimizer step {step}")]
    NonFiniteGradient { step: u64 },

    /// The angle curve never flattens; carries the full curve so callers can
    /// inspect what was actually measured.
    #[error("no plateau found in the angle curve")]
    NoPlateau { curve: Vec<f64> },

    #[error("rank-zero input: no variance left after centering")]
    RankZero,

    #[error("{n} points exceed the agglomerative cap of {cap}; subsample first")]
    WardCapExceeded { n: usize, cap: usize },

    #[error("fewer distinct points ({distinct}) than clusters ({k})")]
    TooFewDistinctPoints { distinct: usize, k: usize },

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bad file format: {what}")]
    BadFormat { what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
