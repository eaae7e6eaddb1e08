//! Marginalized per-feature posterior updates for online logistic regression.
//!
//! Each example is scored with the variance-shrunk mixture prediction, then
//! every active feature's Gaussian is updated against the posterior obtained
//! by marginalizing all other active features out through the self-excluding
//! aggregate. The mean update is a one-dimensional fixed point, solved either
//! by Newton iteration or by a closed-form first-order approximation; the
//! variance update matches either the posterior peak height or its curvature
//! (Laplace).

use crate::error::Result;
use crate::model::{
    example_stats_into, ActiveFeature, ExampleStats, FeatureId, GaussianParam, Label, ModelState,
    PriorConfig, SparseExample,
};
use crate::special::{log_sigmoid, shrunk_prediction, sigmoid, Prediction, ShrinkKind, PI_OVER_8};

/// How the per-feature mean update is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMethod {
    /// Iterate the fixed point with Newton's method.
    Newton,
    /// Single-operation first-order approximation around the pre-update mean.
    Taylor,
}

/// How the per-feature variance update is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarMethod {
    /// Match the height of the posterior peak.
    Peak,
    /// Match the curvature at the peak (Laplace).
    Laplace,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticConfig {
    pub mean_method: MeanMethod,
    pub var_method: VarMethod,
    pub newton_tol: f64,
    pub newton_max_iters: u32,
}

impl LogisticConfig {
    pub fn new(mean_method: MeanMethod, var_method: VarMethod) -> Self {
        LogisticConfig {
            mean_method,
            var_method,
            newton_tol: 1e-10,
            newton_max_iters: 50,
        }
    }
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig::new(MeanMethod::Taylor, VarMethod::Laplace)
    }
}

/// Squared shrink factor 1 + (pi/8) sigma^2_excl for logistic score units.
#[inline]
pub fn shrink_squared(excl_variance: f64) -> f64 {
    1.0 + PI_OVER_8 * excl_variance
}

/// Per-feature quantities reused between the mean and variance updates:
/// the pre-update probability, the post-update probability, and the shrink.
#[derive(Debug, Clone, Copy)]
pub struct FeatureUpdateScratch {
    /// Probability of the label from pre-update means, shrunk by the
    /// self-excluding variance only.
    pub p_base: f64,
    /// Same probability evaluated at the updated mean of this feature.
    pub p_plus: f64,
    /// sqrt(1 + (pi/8) sigma^2_excl), always >= 1.
    pub shrink: f64,
}

/// Probability of `label` using pre-update means, shrunk by the
/// self-excluding variance (not the total example variance).
#[inline]
pub fn base_probability(label: Label, value: f64, mean: f64, excl_mean: f64, excl_var: f64) -> f64 {
    let shrink = shrink_squared(excl_var).sqrt();
    sigmoid(label.sign() * (excl_mean + value * mean) / shrink)
}

/// Outcome of the Newton mean update.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOutcome {
    pub mean: f64,
    /// Label probability at the returned mean, shrunk by sigma^2_excl.
    pub p_plus: f64,
    /// Curvature of the negative log posterior at the returned mean; its
    /// reciprocal is the Laplace variance.
    pub hessian: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// Solves the posterior-peak fixed point
/// `m = mean + y x sigma^2 (1 - p_plus(m)) / shrink`
/// by Newton iteration started at the pre-update mean.
///
/// Never fails: if the iteration budget runs out the last iterate is returned
/// with `converged == false` so an online stream can keep going.
pub fn mean_update_newton(
    param: GaussianParam,
    label: Label,
    value: f64,
    excl_mean: f64,
    excl_var: f64,
    tol: f64,
    max_iters: u32,
) -> NewtonOutcome {
    let y = label.sign();
    let s2 = shrink_squared(excl_var);
    let s = s2.sqrt();
    let score = |m: f64| y * (excl_mean + value * m) / s;
    if value == 0.0 || param.variance <= 0.0 {
        let p = sigmoid(score(param.mean));
        let hessian = if param.variance > 0.0 {
            1.0 / param.variance + value * value * p * (1.0 - p) / s2
        } else {
            f64::INFINITY
        };
        return NewtonOutcome {
            mean: param.mean,
            p_plus: p,
            hessian,
            iterations: 0,
            converged: true,
        };
    }
    let inv_var = 1.0 / param.variance;
    let coef = y * value / s;
    let mut m = param.mean;
    let mut p = sigmoid(score(m));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let g = (m - param.mean) * inv_var - coef * (1.0 - p);
        let h = inv_var + value * value * p * (1.0 - p) / s2;
        let step = g / h;
        m -= step;
        p = sigmoid(score(m));
        if step.abs() < tol {
            converged = true;
            break;
        }
    }
    let hessian = inv_var + value * value * p * (1.0 - p) / s2;
    NewtonOutcome {
        mean: m,
        p_plus: p,
        hessian,
        iterations,
        converged,
    }
}

/// Closed-form first-order mean update around the pre-update probability.
pub fn mean_update_taylor(
    param: GaussianParam,
    label: Label,
    value: f64,
    excl_mean: f64,
    excl_var: f64,
) -> f64 {
    if value == 0.0 || param.variance <= 0.0 {
        return param.mean;
    }
    let y = label.sign();
    let s2 = shrink_squared(excl_var);
    let s = s2.sqrt();
    let p = sigmoid(y * (excl_mean + value * param.mean) / s);
    let q = 1.0 - p;
    let denom = s * (1.0 + value * value * param.variance * q * p / s2);
    param.mean + y * value * param.variance * q / denom
}

/// Peak-matching variance update: scales the standard deviation by the ratio
/// of the example prediction to the post-update probability, corrected by the
/// prior term at the moved mean. Evaluated in log space; the quadratic
/// exponent is clamped at 50 to keep pathological inputs finite.
pub fn var_update_peak(
    param: GaussianParam,
    new_mean: f64,
    p_t: f64,
    label: Label,
    value: f64,
    excl_mean: f64,
    excl_var: f64,
) -> f64 {
    if value == 0.0 || param.variance <= 0.0 {
        return param.variance;
    }
    let s = shrink_squared(excl_var).sqrt();
    let ln_p_plus = log_sigmoid(label.sign() * (excl_mean + value * new_mean) / s);
    let delta = new_mean - param.mean;
    let exponent = (delta * delta / (2.0 * param.variance)).min(50.0);
    let ln_p_t = p_t.max(f64::MIN_POSITIVE).ln();
    param.variance * (2.0 * (ln_p_t - ln_p_plus + exponent)).exp()
}

/// Laplace variance update: adds the likelihood curvature at the updated mean
/// to the prior precision.
#[inline]
pub fn var_update_laplace(variance: f64, value: f64, excl_var: f64, p_plus: f64) -> f64 {
    if value == 0.0 || variance <= 0.0 {
        return variance;
    }
    1.0 / (1.0 / variance + value * value * p_plus * (1.0 - p_plus) / shrink_squared(excl_var))
}

/// Online logistic learner with marginalized per-feature updates.
#[derive(Debug, Clone)]
pub struct MarginalLogistic {
    model: ModelState,
    cfg: LogisticConfig,
    stats: ExampleStats,
    staged: Vec<(FeatureId, GaussianParam)>,
    newton_warnings: u64,
}

impl MarginalLogistic {
    pub fn new(prior: PriorConfig, cfg: LogisticConfig) -> Self {
        MarginalLogistic {
            model: ModelState::new(prior),
            cfg,
            stats: ExampleStats::new(),
            staged: Vec::new(),
            newton_warnings: 0,
        }
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn config(&self) -> &LogisticConfig {
        &self.cfg
    }

    /// Count of feature updates whose Newton iteration hit the budget.
    pub fn newton_warnings(&self) -> u64 {
        self.newton_warnings
    }

    /// Prediction for the example's label from current state, without updating.
    pub fn predict(&self, ex: &SparseExample) -> Result<Prediction> {
        let stats = crate::model::example_stats(&self.model, ex)?;
        shrunk_prediction(
            ex.label(),
            stats.total_mean,
            stats.total_variance,
            ShrinkKind::Logistic,
        )
    }

    fn updated_param(&mut self, f: &ActiveFeature, label: Label, p_t: f64) -> GaussianParam {
        let param = GaussianParam {
            mean: f.mean,
            variance: f.variance,
        };
        let (new_mean, p_plus) = match self.cfg.mean_method {
            MeanMethod::Newton => {
                let out = mean_update_newton(
                    param,
                    label,
                    f.value,
                    f.excl_mean,
                    f.excl_variance,
                    self.cfg.newton_tol,
                    self.cfg.newton_max_iters,
                );
                if !out.converged {
                    self.newton_warnings += 1;
                }
                (out.mean, out.p_plus)
            }
            MeanMethod::Taylor => {
                let m = mean_update_taylor(param, label, f.value, f.excl_mean, f.excl_variance);
                let s = shrink_squared(f.excl_variance).sqrt();
                let p_plus = sigmoid(label.sign() * (f.excl_mean + f.value * m) / s);
                (m, p_plus)
            }
        };
        let new_var = match self.cfg.var_method {
            VarMethod::Peak => var_update_peak(
                param,
                new_mean,
                p_t,
                label,
                f.value,
                f.excl_mean,
                f.excl_variance,
            ),
            VarMethod::Laplace => var_update_laplace(f.variance, f.value, f.excl_variance, p_plus),
        };
        GaussianParam {
            mean: new_mean,
            variance: new_var,
        }
    }

    /// Predicts the observed label, then updates every active feature from the
    /// same pre-update snapshot (so feature order within an example cannot
    /// matter), and commits.
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
            let next = self.updated_param(f, label, p_t.value());
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
