//! Joint Gaussian update over all active features of an example.
//!
//! Instead of marginalizing each feature separately, the active slice is
//! updated as one multi-dimensional Laplace step. The prior covariance of a
//! slice starts diagonal (from the per-feature variances), every Hessian is
//! diagonal-plus-rank-one, and the Sherman-Morrison identity keeps each
//! Newton or Taylor step linear in the number of active features. Only the
//! covariance diagonal is scattered back to the sparse model; off-diagonal
//! mass is per-example scratch.

use crate::error::{ModelError, Result};
use crate::model::{FeatureId, GaussianParam, Label, ModelState, PriorConfig, SparseExample};
use crate::special::{shrunk_prediction, sigmoid, Prediction, ShrinkKind};

pub use crate::logistic::MeanMethod;

/// Small dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = SymMatrix::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds from row-major data; the caller promises symmetry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(ModelError::Config(format!(
                "matrix data length {} does not match dimension {n}",
                data.len()
            )));
        }
        Ok(SymMatrix { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.get(i, j) != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Symmetry and positive-diagonal check; a cheap necessary condition for
    /// SPD used to validate inputs (loss of definiteness shows up as a
    /// nonpositive Sherman-Morrison denominator).
    fn check_spd_light(&self) -> Result<()> {
        for i in 0..self.n {
            if !(self.get(i, i).is_finite() && self.get(i, i) > 0.0) {
                return Err(ModelError::NotPositiveDefinite("nonpositive diagonal"));
            }
            for j in 0..i {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let scale = a.abs().max(b.abs()).max(1.0);
                if !(a.is_finite() && b.is_finite()) || (a - b).abs() > 1e-9 * scale {
                    return Err(ModelError::NotPositiveDefinite("asymmetric input"));
                }
            }
        }
        Ok(())
    }
}

/// (Sigma^-1 + alpha x x^T)^-1 computed without inverting anything:
/// Sigma - alpha (Sigma x)(Sigma x)^T / (1 + alpha x^T Sigma x).
///
/// Only the upper triangle is computed and mirrored, so the result is
/// symmetric by construction.
pub fn sherman_morrison_downdate(sigma: &SymMatrix, x: &[f64], alpha: f64) -> Result<SymMatrix> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(ModelError::Config(format!(
            "sherman_morrison_downdate needs alpha >= 0, got {alpha}"
        )));
    }
    sigma.check_spd_light()?;
    let n = sigma.dim();
    if x.len() != n {
        return Err(ModelError::Config(format!(
            "vector length {} does not match matrix dimension {n}",
            x.len()
        )));
    }
    let v = sigma.mul_vec(x);
    let b: f64 = x.iter().zip(&v).map(|(a, c)| a * c).sum();
    let denom = 1.0 + alpha * b;
    if !(denom.is_finite() && denom > 1e-300) {
        return Err(ModelError::NotPositiveDefinite(
            "sherman-morrison denominator not positive",
        ));
    }
    let f = alpha / denom;
    let mut out = sigma.clone();
    for i in 0..n {
        for j in i..n {
            let val = sigma.get(i, j) - f * v[i] * v[j];
            out.set(i, j, val);
            out.set(j, i, val);
        }
    }
    Ok(out)
}

/// All per-example values of the active slice: ids, feature values, means,
/// and the prior covariance (diagonal when gathered from sparse state).
#[derive(Debug, Clone)]
pub struct ActiveSlice {
    pub ids: Vec<FeatureId>,
    pub values: Vec<f64>,
    pub means: Vec<f64>,
    pub cov: SymMatrix,
}

impl ActiveSlice {
    pub fn new(
        ids: Vec<FeatureId>,
        values: Vec<f64>,
        means: Vec<f64>,
        cov: SymMatrix,
    ) -> Result<Self> {
        let n = ids.len();
        if values.len() != n || means.len() != n || cov.dim() != n {
            return Err(ModelError::Config(
                "active slice component lengths disagree".into(),
            ));
        }
        cov.check_spd_light()?;
        Ok(ActiveSlice {
            ids,
            values,
            means,
            cov,
        })
    }

    fn score(&self, means: &[f64]) -> f64 {
        self.values.iter().zip(means).map(|(x, u)| x * u).sum()
    }
}

/// Result of a joint update: new means and the full posterior covariance.
#[derive(Debug, Clone)]
pub struct MultiOutcome {
    pub means: Vec<f64>,
    pub cov: SymMatrix,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMode {
    /// Track the covariance through rank-one downdates.
    Covariance,
    /// Track the precision through rank-one additions.
    Precision,
}

#[derive(Debug, Clone, Copy)]
pub struct MultiConfig {
    pub method: MeanMethod,
    pub mode: CovMode,
    pub newton_tol: f64,
    pub newton_max_iters: u32,
}

impl MultiConfig {
    pub fn new(method: MeanMethod) -> Self {
        MultiConfig {
            method,
            mode: CovMode::Covariance,
            newton_tol: 1e-10,
            newton_max_iters: 50,
        }
    }
}

impl Default for MultiConfig {
    fn default() -> Self {
        MultiConfig::new(MeanMethod::Taylor)
    }
}

/// Newton iteration for the joint posterior mode. Each step applies the
/// inverse diagonal-plus-rank-one Hessian analytically, so one iteration is
/// O(d_t) once v = Sigma x is known.
pub fn update_newton_multi(
    slice: &ActiveSlice,
    label: Label,
    cfg: &MultiConfig,
) -> Result<MultiOutcome> {
    slice.cov.check_spd_light()?;
    let y = label.sign();
    let x = &slice.values;
    let v = slice.cov.mul_vec(x);
    let b: f64 = x.iter().zip(&v).map(|(a, c)| a * c).sum();
    let mut u = slice.means.clone();
    let mut p = sigmoid(y * slice.score(&u));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.newton_max_iters {
        iterations += 1;
        let alpha = p * (1.0 - p);
        let c = y * (1.0 - p);
        // H^-1 g for g = Sigma^-1 (u - u0) - y x (1 - p): the rank-one
        // correction collapses onto v, so the whole step is delta_u minus a
        // scalar multiple of v.
        let a: f64 = x
            .iter()
            .zip(u.iter().zip(&slice.means))
            .map(|(xi, (ui, u0))| xi * (ui - u0))
            .sum();
        let factor = alpha * (a - c * b) / (1.0 + alpha * b);
        let mut max_step = 0.0f64;
        for i in 0..u.len() {
            let step = (u[i] - slice.means[i]) - (c + factor) * v[i];
            u[i] -= step;
            max_step = max_step.max(step.abs());
        }
        p = sigmoid(y * slice.score(&u));
        if max_step < cfg.newton_tol {
            converged = true;
            break;
        }
    }
    let alpha = p * (1.0 - p);
    let cov = sherman_morrison_downdate(&slice.cov, x, alpha)?;
    Ok(MultiOutcome {
        means: u,
        cov,
        iterations,
        converged,
    })
}

/// Single-pass Taylor update: temporary downdate with the pre-update
/// probability moves the mean, then the original covariance is downdated
/// with the post-update probability.
pub fn update_taylor_multi(slice: &ActiveSlice, label: Label) -> Result<MultiOutcome> {
    slice.cov.check_spd_light()?;
    let y = label.sign();
    let x = &slice.values;
    let v = slice.cov.mul_vec(x);
    let b: f64 = x.iter().zip(&v).map(|(a, c)| a * c).sum();
    let p_pre = sigmoid(y * slice.score(&slice.means));
    let alpha_pre = p_pre * (1.0 - p_pre);
    // Sigma~ x = v / (1 + alpha_pre b), so the mean moves along v.
    let gain = y * (1.0 - p_pre) / (1.0 + alpha_pre * b);
    let means: Vec<f64> = slice
        .means
        .iter()
        .zip(&v)
        .map(|(u, vi)| u + gain * vi)
        .collect();
    let p_post = sigmoid(y * slice.score(&means));
    let alpha_post = p_post * (1.0 - p_post);
    let cov = sherman_morrison_downdate(&slice.cov, x, alpha_post)?;
    Ok(MultiOutcome {
        means,
        cov,
        iterations: 1,
        converged: true,
    })
}

/// Result of a precision-mode update: new means plus the posterior precision.
#[derive(Debug, Clone)]
pub struct PrecisionOutcome {
    pub means: Vec<f64>,
    pub precision: SymMatrix,
    pub iterations: u32,
    pub converged: bool,
}

/// Precision-mode update: the posterior state is kept as
/// H_new = Sigma^-1 + alpha_post x x^T, the additive form that stays valid
/// under mini-batch accumulation. The single-example mean step goes through
/// the covariance slice directly, which requires a diagonal prior slice.
pub fn update_precision_mode(
    slice: &ActiveSlice,
    label: Label,
    cfg: &MultiConfig,
) -> Result<PrecisionOutcome> {
    if !slice.cov.is_diagonal() {
        return Err(ModelError::Config(
            "precision mode expects a diagonal prior slice".into(),
        ));
    }
    let out = match cfg.method {
        MeanMethod::Newton => update_newton_multi(slice, label, cfg)?,
        MeanMethod::Taylor => update_taylor_multi(slice, label)?,
    };
    let y = label.sign();
    let p_post = sigmoid(y * slice.score(&out.means));
    let alpha_post = p_post * (1.0 - p_post);
    let n = slice.ids.len();
    let mut h = SymMatrix::zeros(n);
    for i in 0..n {
        h.set(i, i, 1.0 / slice.cov.get(i, i));
    }
    for i in 0..n {
        for j in i..n {
            let val = h.get(i, j) + alpha_post * slice.values[i] * slice.values[j];
            h.set(i, j, val);
            h.set(j, i, val);
        }
    }
    Ok(PrecisionOutcome {
        means: out.means,
        precision: h,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Online learner applying the joint update per example and persisting only
/// the covariance diagonal. The per-example slice algebra runs on an O(d_t)
/// vector fast path; every Newton iterate lies on the line u0 + coeff * v,
/// so the iteration reduces to a scalar.
#[derive(Debug, Clone)]
pub struct MultidimGauss {
    model: ModelState,
    cfg: MultiConfig,
    newton_warnings: u64,
    ids: Vec<FeatureId>,
    values: Vec<f64>,
    means0: Vec<f64>,
    variances: Vec<f64>,
    v: Vec<f64>,
}

impl MultidimGauss {
    pub fn new(prior: PriorConfig, cfg: MultiConfig) -> Self {
        MultidimGauss {
            model: ModelState::new(prior),
            cfg,
            newton_warnings: 0,
            ids: Vec::new(),
            values: Vec::new(),
            means0: Vec::new(),
            variances: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn newton_warnings(&self) -> u64 {
        self.newton_warnings
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
        self.ids.clear();
        self.values.clear();
        self.means0.clear();
        self.variances.clear();
        let mut score0 = 0.0;
        let mut total_var = 0.0;
        for &(id, value) in ex.features() {
            let p = self.model.param(id);
            self.ids.push(id);
            self.values.push(value);
            self.means0.push(p.mean);
            self.variances.push(p.variance);
            score0 += value * p.mean;
            total_var += value * value * p.variance;
        }
        if !(score0.is_finite() && total_var.is_finite()) {
            return Err(ModelError::NumericOverflow("multidim gather"));
        }
        let p_t = shrunk_prediction(ex.label(), score0, total_var, ShrinkKind::Logistic)?;
        if self.ids.is_empty() {
            return Ok(p_t);
        }
        let y = ex.label().sign();
        self.v.clear();
        self.v
            .extend(self.variances.iter().zip(&self.values).map(|(s2, x)| s2 * x));
        let b = total_var; // x^T Sigma x for the diagonal slice
        let coeff = match self.cfg.method {
            MeanMethod::Taylor => {
                let p_pre = sigmoid(y * score0);
                let a_pre = p_pre * (1.0 - p_pre);
                y * (1.0 - p_pre) / (1.0 + a_pre * b)
            }
            MeanMethod::Newton => {
                let mut coeff = 0.0f64;
                let mut p = sigmoid(y * score0);
                let mut iterations = 0;
                let mut converged = false;
                let vmax = self.v.iter().fold(0.0f64, |m, &vi| m.max(vi.abs()));
                while iterations < self.cfg.newton_max_iters {
                    iterations += 1;
                    let alpha = p * (1.0 - p);
                    let c = y * (1.0 - p);
                    let a = coeff * b;
                    let factor = alpha * (a - c * b) / (1.0 + alpha * b);
                    let next = c + factor;
                    let max_step = (next - coeff).abs() * vmax;
                    coeff = next;
                    p = sigmoid(y * (score0 + coeff * b));
                    if max_step < self.cfg.newton_tol {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    self.newton_warnings += 1;
                }
                coeff
            }
        };
        let score_post = score0 + coeff * b;
        let p_post = sigmoid(y * score_post);
        let alpha_post = p_post * (1.0 - p_post);
        let shrink = alpha_post / (1.0 + alpha_post * b);
        for i in 0..self.ids.len() {
            let mean = self.means0[i] + coeff * self.v[i];
            let variance = self.variances[i] - shrink * self.v[i] * self.v[i];
            self.model.set_param(self.ids[i], GaussianParam { mean, variance })?;
        }
        Ok(p_t)
    }
}
