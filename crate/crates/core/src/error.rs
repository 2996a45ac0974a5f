//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("malformed record at line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// A probability query was issued before any state was observed.
    #[error("model undefined: no observations yet")]
    UndefinedModel,

    /// Conditional asked for a source state never observed before the final
    /// step; distinct from a conditional probability of zero.
    #[error("conditional undefined for the requested source state")]
    UndefinedConditional,

    #[error("zero range: series is constant")]
    ZeroRange,

    #[error("zero variance: series is constant")]
    ZeroVariance,

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
