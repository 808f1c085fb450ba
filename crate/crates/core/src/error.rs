use thiserror::Error;

/// Errors produced by the forest library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point coordinate {coord} = {value} is outside [0, 1)")]
    OutsideUnitCube { coord: usize, value: f64 },

    #[error("{splits} splits exceed the exact dyadic limit of {limit}")]
    Precision { splits: u32, limit: u32 },

    #[error("depth mismatch: {left} vs {right}")]
    DepthMismatch { left: u32, right: u32 },

    #[error("invalid selection probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("node has too few distinct values along coordinate {coord} to split")]
    Unsplittable { coord: usize },

    #[error("multinomial support too large for exact enumeration: {terms} terms (limit {limit})")]
    SupportTooLarge { terms: u128, limit: u128 },

    #[error("non-positive value {value} at point {index} cannot be log-transformed")]
    NonPositive { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
