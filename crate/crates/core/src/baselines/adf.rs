//! Assumed density filtering: a single forward pass that matches the first
//! two moments of each feature's marginalized posterior.
//!
//! With the likelihood bridged to a normal CDF, the product of a Gaussian
//! prior and a probit factor has closed-form moments: the mean shifts along
//! the inverse Mills ratio and the variance shrinks by hazard(z)(z+hazard(z)),
//! both scaled by the total bridged score variance
//! 8/pi + sigma^2_excl + x^2 sigma^2.

use crate::error::Result;
use crate::model::{
    example_stats_into, ActiveFeature, ExampleStats, FeatureId, GaussianParam, Label, ModelState,
    PriorConfig, SparseExample,
};
use crate::special::{hazard, shrunk_prediction, Prediction, ShrinkKind};

const EIGHT_OVER_PI: f64 = 8.0 / std::f64::consts::PI;

/// Closed-form moment match of N(mean, variance) times the bridged likelihood
/// factor for (label, value) given the self-excluding aggregate.
pub fn adf_moments(
    mean: f64,
    variance: f64,
    label: Label,
    value: f64,
    excl_mean: f64,
    excl_var: f64,
) -> (f64, f64) {
    if value == 0.0 || variance <= 0.0 {
        return (mean, variance);
    }
    let y = label.sign();
    let total = EIGHT_OVER_PI + excl_var + value * value * variance;
    let root = total.sqrt();
    let z = y * (excl_mean + value * mean) / root;
    let h = hazard(z);
    let new_mean = mean + variance * y * value * h / root;
    let new_var = variance - variance * variance * value * value * h * (z + h) / total;
    (new_mean, new_var)
}

/// Single-pass moment-matching learner over the marginalized posteriors.
#[derive(Debug, Clone)]
pub struct AdfLearner {
    model: ModelState,
    stats: ExampleStats,
    staged: Vec<(FeatureId, GaussianParam)>,
}

impl AdfLearner {
    pub fn new(prior: PriorConfig) -> Self {
        AdfLearner {
            model: ModelState::new(prior),
            stats: ExampleStats::new(),
            staged: Vec::new(),
        }
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn predict(&self, ex: &SparseExample) -> Result<Prediction> {
        let stats = crate::model::example_stats(&self.model, ex)?;
        shrunk_prediction(
            ex.label(),
            stats.total_mean,
            stats.total_variance,
            ShrinkKind::Logistic,
        )
    }

    fn updated_param(&self, f: &ActiveFeature, label: Label) -> GaussianParam {
        let (mean, variance) =
            adf_moments(f.mean, f.variance, label, f.value, f.excl_mean, f.excl_variance);
        GaussianParam { mean, variance }
    }

    pub fn process_example(&mut self, ex: &SparseExample) -> Result<Prediction> {
        let mut stats = std::mem::take(&mut self.stats);
        example_stats_into(&self.model, ex, &mut stats)?;
        let p_t = shrunk_prediction(
            ex.label(),
            stats.total_mean,
            stats.total_variance,
            ShrinkKind::Logistic,
        )?;
        let label = ex.label();
        self.staged.clear();
        for f in &stats.active {
            let next = self.updated_param(f, label);
            self.staged.push((f.id, next));
        }
        for i in 0..self.staged.len() {
            let (id, p) = self.staged[i];
            self.model.set_param(id, p)?;
        }
        self.stats = stats;
        Ok(p_t)
    }
}
