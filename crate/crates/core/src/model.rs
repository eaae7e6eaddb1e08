//! Domain types shared by all learners: sparse examples, per-feature Gaussian
//! posteriors, lazily initialized model state, and per-example aggregate
//! statistics with self-excluding pairs.

use std::collections::HashMap;
use std::fmt;

use crate::error::{ModelError, Result};

/// Index of a logical feature, unique within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u64);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Binary label in {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    /// The label as a sign, -1.0 or +1.0.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }

    /// Parses a sign encoding; 0 is accepted as the negative class so that
    /// {0,1}-encoded sources can be ingested directly.
    pub fn from_sign(v: f64) -> Result<Label> {
        if v == 1.0 {
            Ok(Label::Pos)
        } else if v == -1.0 || v == 0.0 {
            Ok(Label::Neg)
        } else {
            Err(ModelError::InvalidLabel(v))
        }
    }
}

/// One round's observation: distinct (feature, value) pairs plus the label.
///
/// Feature values live in [-1, 1]. The constructor sorts features by id, so
/// all downstream accumulation is independent of the caller's ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    features: Vec<(FeatureId, f64)>,
    label: Label,
}

impl SparseExample {
    pub fn new(mut features: Vec<(FeatureId, f64)>, label: Label) -> Result<Self> {
        for &(id, v) in &features {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteValue { id, value: v });
            }
            if !(-1.0..=1.0).contains(&v) {
                return Err(ModelError::ValueOutOfRange { id, value: v });
            }
        }
        features.sort_unstable_by_key(|&(id, _)| id);
        for w in features.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ModelError::DuplicateFeature(w[0].0));
            }
        }
        Ok(SparseExample { features, label })
    }

    #[inline]
    pub fn features(&self) -> &[(FeatureId, f64)] {
        &self.features
    }

    #[inline]
    pub fn label(&self) -> Label {
        self.label
    }

    /// Number of active features d_t.
    #[inline]
    pub fn len(&self) -> usize {
        self.features.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Per-feature posterior: mean in log-odds units and a strictly positive variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParam {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianParam {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(ModelError::NumericOverflow("GaussianParam mean"));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(ModelError::InvalidVariance(variance));
        }
        Ok(GaussianParam { mean, variance })
    }
}

/// Prior used to lazily initialize unseen features.
///
/// `weight_bound` is informational metadata for a bounded-weight comparator
/// class; weights are never projected onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    pub mean: f64,
    pub variance: f64,
    pub weight_bound: Option<f64>,
}

impl PriorConfig {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(ModelError::InvalidVariance(variance));
        }
        Ok(PriorConfig {
            mean,
            variance,
            weight_bound: None,
        })
    }

    /// Surrogate for the Jeffreys prior in log-odds units: N(0, 2*pi).
    pub fn jeffreys_surrogate() -> PriorConfig {
        PriorConfig {
            mean: 0.0,
            variance: 2.0 * std::f64::consts::PI,
            weight_bound: None,
        }
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mean: 0.0,
            variance: 1.0,
            weight_bound: None,
        }
    }
}

/// The learner's entire memory: a sparse map from feature id to posterior.
///
/// Features never observed consume no memory and read back as the prior.
#[derive(Debug, Clone)]
pub struct ModelState {
    params: HashMap<FeatureId, GaussianParam>,
    prior: PriorConfig,
}

impl ModelState {
    pub fn new(prior: PriorConfig) -> Self {
        ModelState {
            params: HashMap::new(),
            prior,
        }
    }

    #[inline]
    pub fn prior(&self) -> &PriorConfig {
        &self.prior
    }

    /// Stored posterior for `id`, or the prior if the feature is unseen.
    /// Read-only: does not allocate state for unseen features.
    #[inline]
    pub fn param(&self, id: FeatureId) -> GaussianParam {
        self.params.get(&id).copied().unwrap_or(GaussianParam {
            mean: self.prior.mean,
            variance: self.prior.variance,
        })
    }

    /// Stores an updated posterior for `id`, validating its invariants.
    pub fn set_param(&mut self, id: FeatureId, param: GaussianParam) -> Result<()> {
        if !param.mean.is_finite() {
            return Err(ModelError::NumericOverflow("posterior mean"));
        }
        if !(param.variance.is_finite() && param.variance > 0.0) {
            return Err(ModelError::InvalidVariance(param.variance));
        }
        self.params.insert(id, param);
        Ok(())
    }

    /// Number of features with materialized state.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, GaussianParam)> + '_ {
        self.params.iter().map(|(&id, &p)| (id, p))
    }
}

/// An active feature's snapshot within one example: its posterior plus the
/// self-excluding aggregate of everything else.
#[derive(Debug, Clone, Copy)]
pub struct ActiveFeature {
    pub id: FeatureId,
    pub value: f64,
    pub mean: f64,
    pub variance: f64,
    /// Aggregate mean of all other active features: mu_t - x_i * mean_i.
    pub excl_mean: f64,
    /// Aggregate variance of all other active features, clamped at 0.
    pub excl_variance: f64,
}

/// Aggregate score statistics for one example along with per-feature
/// self-excluding pairs, computed in a single pass.
#[derive(Debug, Clone, Default)]
pub struct ExampleStats {
    /// Sum of x_i * mean_i over active features.
    pub total_mean: f64,
    /// Sum of x_i^2 * variance_i over active features.
    pub total_variance: f64,
    pub active: Vec<ActiveFeature>,
}

impl ExampleStats {
    pub fn new() -> Self {
        ExampleStats::default()
    }
}

/// Computes aggregate and self-excluding statistics for `ex` under `model`.
pub fn example_stats(model: &ModelState, ex: &SparseExample) -> Result<ExampleStats> {
    let mut stats = ExampleStats::new();
    example_stats_into(model, ex, &mut stats)?;
    Ok(stats)
}

/// Same as [`example_stats`] but reuses the caller's buffer, for hot loops.
pub fn example_stats_into(
    model: &ModelState,
    ex: &SparseExample,
    stats: &mut ExampleStats,
) -> Result<()> {
    stats.active.clear();
    let mut total_mean = 0.0;
    let mut total_variance = 0.0;
    for &(id, value) in ex.features() {
        let p = model.param(id);
        total_mean += value * p.mean;
        total_variance += value * value * p.variance;
        stats.active.push(ActiveFeature {
            id,
            value,
            mean: p.mean,
            variance: p.variance,
            excl_mean: 0.0,
            excl_variance: 0.0,
        });
    }
    if !(total_mean.is_finite() && total_variance.is_finite()) {
        return Err(ModelError::NumericOverflow("example_stats accumulation"));
    }
    for f in &mut stats.active {
        f.excl_mean = total_mean - f.value * f.mean;
        // Cancellation from the subtraction can leave a tiny negative residue.
        f.excl_variance = (total_variance - f.value * f.value * f.variance).max(0.0);
    }
    stats.total_mean = total_mean;
    stats.total_variance = total_variance;
    Ok(())
}
