//! Error types shared across the crate.

use crate::model::FeatureId;

/// Errors produced by model operations, learners, and the harness.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate feature id {0} within one example")]
    DuplicateFeature(FeatureId),

    #[error("non-finite value {value} for feature {id}")]
    NonFiniteValue { id: FeatureId, value: f64 },

    #[error("feature {id} value {value} outside [-1, 1]")]
    ValueOutOfRange { id: FeatureId, value: f64 },

    #[error("label must be -1 or +1, got {0}")]
    InvalidLabel(f64),

    #[error("variance must be strictly positive and finite, got {0}")]
    InvalidVariance(f64),

    #[error("negative variance {0} passed where sigma^2 >= 0 is required")]
    NegativeVariance(f64),

    #[error("non-finite accumulation in {0}")]
    NumericOverflow(&'static str),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replay parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
