//! Reference learners for comparison curves.

pub mod adf;
pub mod sgd;
pub mod vb;

pub use adf::AdfLearner;
pub use sgd::{SgdAdagrad, SgdConfig};
pub use vb::{VbConfig, VbLearner};
