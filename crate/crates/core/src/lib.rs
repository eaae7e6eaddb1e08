//! Low-complexity Bayesian online logistic and probit regression for sparse
//! feature streams.
//!
//! Each feature keeps an independent Gaussian posterior over its log-odds
//! weight. Predictions marginalize the weights through a probit bridge, and
//! per-feature updates marginalize every other active feature out through its
//! self-excluding aggregate, so an update costs O(d_t) per example no matter
//! how large the feature space is.
//!
//! The crate also ships the reference learners used for comparison curves
//! (a joint multi-dimensional Gaussian update, assumed density filtering,
//! marginalized variational Bayes, AdaGrad SGD), synthetic stream generators
//! with known ground-truth weights, and a progressive-validation harness that
//! measures cumulative regret against the generating weights.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod learner;
pub mod logistic;
pub mod model;
pub mod multidim;
pub mod probit;
pub mod special;

pub use error::{ModelError, Result};
pub use model::{
    example_stats, ActiveFeature, ExampleStats, FeatureId, GaussianParam, Label, ModelState,
    PriorConfig, SparseExample,
};
pub use special::{shrunk_prediction, Prediction, ShrinkKind};
