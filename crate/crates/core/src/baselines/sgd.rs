//! Stochastic gradient descent with AdaGrad per-feature step sizes, the
//! point-estimate baseline.

use std::collections::HashMap;

use crate::error::Result;
use crate::model::{FeatureId, SparseExample};
use crate::special::{sigmoid, Prediction};

#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub adagrad_epsilon: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64) -> Self {
        SgdConfig {
            learning_rate,
            l2: 0.0,
            adagrad_epsilon: 1e-6,
        }
    }
}

/// Per-feature weight plus its accumulated squared gradient.
#[derive(Debug, Clone, Copy, Default)]
struct Slot {
    weight: f64,
    grad_sq: f64,
}

#[derive(Debug, Clone)]
pub struct SgdAdagrad {
    slots: HashMap<FeatureId, Slot>,
    cfg: SgdConfig,
}

impl SgdAdagrad {
    pub fn new(cfg: SgdConfig) -> Self {
        SgdAdagrad {
            slots: HashMap::new(),
            cfg,
        }
    }

    pub fn weight(&self, id: FeatureId) -> f64 {
        self.slots.get(&id).map_or(0.0, |s| s.weight)
    }

    pub fn accumulator(&self, id: FeatureId) -> f64 {
        self.slots.get(&id).map_or(0.0, |s| s.grad_sq)
    }

    fn score(&self, ex: &SparseExample) -> f64 {
        ex.features()
            .iter()
            .map(|&(id, v)| v * self.weight(id))
            .sum()
    }

    pub fn predict(&self, ex: &SparseExample) -> Result<Prediction> {
        Ok(Prediction::new(sigmoid(
            ex.label().sign() * self.score(ex),
        )))
    }

    /// Predicts with the current weights, then applies one AdaGrad step. The
    /// gradient uses the unclamped sigmoid; clamping is loss accounting only.
    pub fn process_example(&mut self, ex: &SparseExample) -> Result<Prediction> {
        let y = ex.label().sign();
        let score = self.score(ex);
        let p = sigmoid(y * score);
        let residual = y * (1.0 - p);
        for &(id, v) in ex.features() {
            if v == 0.0 {
                continue;
            }
            let slot = self.slots.entry(id).or_default();
            let g = v * residual - self.cfg.l2 * slot.weight;
            slot.grad_sq += g * g;
            slot.weight += self.cfg.learning_rate * g / (slot.grad_sq + self.cfg.adagrad_epsilon).sqrt();
        }
        Ok(Prediction::new(p))
    }
}
