//! Marginalized variational Bayes with Monte Carlo expectations.
//!
//! For each active feature, the KL divergence between a Gaussian candidate
//! posterior and the marginalized true posterior is minimized jointly over
//! (mean, standard deviation) by Newton's method. The intractable expected
//! log loss term is replaced by an average over N standard-normal samples,
//! drawn once per feature update and held fixed across Newton iterations so
//! each update optimizes one deterministic objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::model::{
    example_stats_into, ActiveFeature, ExampleStats, FeatureId, GaussianParam, Label, ModelState,
    PriorConfig, SparseExample,
};
use crate::special::{shrunk_prediction, sigmoid, Prediction, ShrinkKind, PI_OVER_8};

#[derive(Debug, Clone, Copy)]
pub struct VbConfig {
    /// Monte Carlo samples per feature update.
    pub n_samples: u32,
    pub newton_tol: f64,
    pub newton_max_iters: u32,
    /// Floor on the candidate standard deviation.
    pub sigma_min: f64,
    pub rng_seed: u64,
}

impl VbConfig {
    pub fn new(n_samples: u32, rng_seed: u64) -> Self {
        VbConfig {
            n_samples: n_samples.max(1),
            newton_tol: 1e-8,
            newton_max_iters: 20,
            sigma_min: 1e-6,
            rng_seed,
        }
    }
}

/// Marginalized VB learner; owns its sampling RNG, so runs are reproducible
/// from the config seed.
#[derive(Debug, Clone)]
pub struct VbLearner {
    model: ModelState,
    cfg: VbConfig,
    rng: ChaCha8Rng,
    samples: Vec<f64>,
    stats: ExampleStats,
    staged: Vec<(FeatureId, GaussianParam)>,
    warnings: u64,
}

impl VbLearner {
    pub fn new(prior: PriorConfig, cfg: VbConfig) -> Self {
        VbLearner {
            model: ModelState::new(prior),
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            samples: Vec::with_capacity(cfg.n_samples as usize),
            stats: ExampleStats::new(),
            staged: Vec::new(),
            warnings: 0,
        }
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn warnings(&self) -> u64 {
        self.warnings
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
            self.samples.clear();
            for _ in 0..self.cfg.n_samples {
                self.samples.push(self.rng.sample(StandardNormal));
            }
            let (next, converged) = joint_newton(f, label, &self.samples, &self.cfg);
            if !converged {
                self.warnings += 1;
            }
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

/// Joint Newton step over (mean, sd) of the sampled KL objective for one
/// feature, started at the prior values. A non-positive-definite 2x2 Hessian
/// falls back to a plain gradient step with step size 0.1.
pub fn joint_newton(
    f: &ActiveFeature,
    label: Label,
    samples: &[f64],
    cfg: &VbConfig,
) -> (GaussianParam, bool) {
    let prior_mean = f.mean;
    let prior_var = f.variance;
    let prior_sd = prior_var.sqrt();
    if f.value == 0.0 || prior_var <= 0.0 {
        return (
            GaussianParam {
                mean: prior_mean,
                variance: prior_var,
            },
            true,
        );
    }
    let y = label.sign();
    let shrink = (1.0 + PI_OVER_8 * f.excl_variance).sqrt();
    let alpha = y * f.value / shrink;
    let base = y * f.excl_mean / shrink;
    let n = samples.len() as f64;

    let mut mean = prior_mean;
    let mut sd = prior_sd;
    let mut converged = false;
    for _ in 0..cfg.newton_max_iters {
        let (mut sum_q, mut sum_sq, mut sum_pq, mut sum_spq, mut sum_sspq) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for &s in samples {
            let p = sigmoid(base + alpha * (mean + s * sd));
            let q = 1.0 - p;
            let pq = p * q;
            sum_q += q;
            sum_sq += s * q;
            sum_pq += pq;
            sum_spq += s * pq;
            sum_sspq += s * s * pq;
        }
        let g_mean = (mean - prior_mean) / prior_var - alpha * sum_q / n;
        let g_sd = -1.0 / sd + sd / prior_var - alpha * sum_sq / n;
        let h_mm = 1.0 / prior_var + alpha * alpha * sum_pq / n;
        let h_ms = alpha * alpha * sum_spq / n;
        let h_ss = 1.0 / (sd * sd) + 1.0 / prior_var + alpha * alpha * sum_sspq / n;
        let det = h_mm * h_ss - h_ms * h_ms;
        let (d_mean, d_sd) = if det > 0.0 && h_mm > 0.0 {
            (
                (h_ss * g_mean - h_ms * g_sd) / det,
                (h_mm * g_sd - h_ms * g_mean) / det,
            )
        } else {
            (0.1 * g_mean, 0.1 * g_sd)
        };
        mean -= d_mean;
        sd = (sd - d_sd).max(cfg.sigma_min);
        if d_mean.abs() < cfg.newton_tol && d_sd.abs() < cfg.newton_tol {
            converged = true;
            break;
        }
    }
    (
        GaussianParam {
            mean,
            variance: (sd * sd).max(cfg.sigma_min * cfg.sigma_min),
        },
        converged,
    )
}
