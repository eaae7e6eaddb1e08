//! The uniform online-learner interface and the algorithm registry that maps
//! benchmark ids onto configured learners.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{AdfLearner, SgdAdagrad, SgdConfig, VbConfig, VbLearner};
use crate::error::{ModelError, Result};
use crate::logistic::{LogisticConfig, MarginalLogistic, MeanMethod, VarMethod};
use crate::model::{PriorConfig, SparseExample};
use crate::multidim::{MultiConfig, MultidimGauss};
use crate::probit::{MarginalProbit, ProbitConfig};
use crate::special::Prediction;

/// One pass of the online protocol: predict the observed label from current
/// state, then update on the example.
pub trait OnlineLearner: Send {
    /// Predict-then-update; returns the pre-update prediction.
    fn process_example(&mut self, ex: &SparseExample) -> Result<Prediction>;

    /// Prediction only, no state change.
    fn predict(&self, ex: &SparseExample) -> Result<Prediction>;

    /// Numeric warnings accumulated so far (for example Newton budget hits).
    fn warning_count(&self) -> u64 {
        0
    }
}

macro_rules! impl_online_learner {
    ($ty:ty $(, $warn:ident)?) => {
        impl OnlineLearner for $ty {
            fn process_example(&mut self, ex: &SparseExample) -> Result<Prediction> {
                <$ty>::process_example(self, ex)
            }
            fn predict(&self, ex: &SparseExample) -> Result<Prediction> {
                <$ty>::predict(self, ex)
            }
            $(fn warning_count(&self) -> u64 {
                self.$warn()
            })?
        }
    };
}

impl_online_learner!(MarginalLogistic, newton_warnings);
impl_online_learner!(MarginalProbit, newton_warnings);
impl_online_learner!(MultidimGauss, newton_warnings);
impl_online_learner!(AdfLearner);
impl_online_learner!(VbLearner, warnings);
impl_online_learner!(SgdAdagrad);

/// Every benchmark algorithm addressable from the CLI and the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmId {
    GaussNewtonPeak,
    GaussNewtonLaplace,
    GaussTaylorPeak,
    GaussTaylorLaplace,
    ProbitNewton,
    ProbitTaylor,
    DimGaussNewton,
    DimGaussTaylor,
    Adf,
    Vb { samples: u32 },
    SgdAdagrad,
}

impl FromStr for AlgorithmId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<AlgorithmId> {
        Ok(match s {
            "gauss-newton-peak" => AlgorithmId::GaussNewtonPeak,
            "gauss-newton-laplace" => AlgorithmId::GaussNewtonLaplace,
            "gauss-taylor-peak" => AlgorithmId::GaussTaylorPeak,
            "gauss-taylor-laplace" => AlgorithmId::GaussTaylorLaplace,
            "probit-newton" => AlgorithmId::ProbitNewton,
            "probit-taylor" => AlgorithmId::ProbitTaylor,
            "dimgauss-newton" => AlgorithmId::DimGaussNewton,
            "dimgauss-taylor" => AlgorithmId::DimGaussTaylor,
            "adf" => AlgorithmId::Adf,
            "sgd-adagrad" => AlgorithmId::SgdAdagrad,
            other => {
                if let Some(n) = other.strip_prefix("vb-") {
                    let samples: u32 = n.parse().map_err(|_| {
                        ModelError::Config(format!("bad sample count in algorithm id {other:?}"))
                    })?;
                    if samples == 0 {
                        return Err(ModelError::Config("vb sample count must be >= 1".into()));
                    }
                    AlgorithmId::Vb { samples }
                } else {
                    return Err(ModelError::Config(format!("unknown algorithm id {other:?}")));
                }
            }
        })
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmId::GaussNewtonPeak => write!(f, "gauss-newton-peak"),
            AlgorithmId::GaussNewtonLaplace => write!(f, "gauss-newton-laplace"),
            AlgorithmId::GaussTaylorPeak => write!(f, "gauss-taylor-peak"),
            AlgorithmId::GaussTaylorLaplace => write!(f, "gauss-taylor-laplace"),
            AlgorithmId::ProbitNewton => write!(f, "probit-newton"),
            AlgorithmId::ProbitTaylor => write!(f, "probit-taylor"),
            AlgorithmId::DimGaussNewton => write!(f, "dimgauss-newton"),
            AlgorithmId::DimGaussTaylor => write!(f, "dimgauss-taylor"),
            AlgorithmId::Adf => write!(f, "adf"),
            AlgorithmId::Vb { samples } => write!(f, "vb-{samples}"),
            AlgorithmId::SgdAdagrad => write!(f, "sgd-adagrad"),
        }
    }
}

/// Shared learner knobs; each algorithm picks the fields it uses.
#[derive(Debug, Clone, Copy)]
pub struct AlgorithmConfig {
    pub prior: PriorConfig,
    pub newton_tol: f64,
    pub newton_max_iters: u32,
    pub sgd: SgdConfig,
    /// Seed for the VB sampler (derived from the run seed by callers).
    pub vb_seed: u64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            prior: PriorConfig::default(),
            newton_tol: 1e-10,
            newton_max_iters: 50,
            sgd: SgdConfig::new(0.3),
            vb_seed: 0,
        }
    }
}

/// Instantiates a learner for an algorithm id.
pub fn build_learner(id: AlgorithmId, cfg: &AlgorithmConfig) -> Box<dyn OnlineLearner> {
    let gauss = |mean: MeanMethod, var: VarMethod| LogisticConfig {
        mean_method: mean,
        var_method: var,
        newton_tol: cfg.newton_tol,
        newton_max_iters: cfg.newton_max_iters,
    };
    match id {
        AlgorithmId::GaussNewtonPeak => Box::new(MarginalLogistic::new(
            cfg.prior,
            gauss(MeanMethod::Newton, VarMethod::Peak),
        )),
        AlgorithmId::GaussNewtonLaplace => Box::new(MarginalLogistic::new(
            cfg.prior,
            gauss(MeanMethod::Newton, VarMethod::Laplace),
        )),
        AlgorithmId::GaussTaylorPeak => Box::new(MarginalLogistic::new(
            cfg.prior,
            gauss(MeanMethod::Taylor, VarMethod::Peak),
        )),
        AlgorithmId::GaussTaylorLaplace => Box::new(MarginalLogistic::new(
            cfg.prior,
            gauss(MeanMethod::Taylor, VarMethod::Laplace),
        )),
        AlgorithmId::ProbitNewton => Box::new(MarginalProbit::new(
            cfg.prior,
            ProbitConfig {
                mean_method: MeanMethod::Newton,
                newton_tol: cfg.newton_tol,
                newton_max_iters: cfg.newton_max_iters,
            },
        )),
        AlgorithmId::ProbitTaylor => Box::new(MarginalProbit::new(
            cfg.prior,
            ProbitConfig {
                mean_method: MeanMethod::Taylor,
                newton_tol: cfg.newton_tol,
                newton_max_iters: cfg.newton_max_iters,
            },
        )),
        AlgorithmId::DimGaussNewton => Box::new(MultidimGauss::new(
            cfg.prior,
            MultiConfig {
                method: MeanMethod::Newton,
                newton_tol: cfg.newton_tol,
                newton_max_iters: cfg.newton_max_iters,
                ..MultiConfig::default()
            },
        )),
        AlgorithmId::DimGaussTaylor => Box::new(MultidimGauss::new(
            cfg.prior,
            MultiConfig {
                method: MeanMethod::Taylor,
                newton_tol: cfg.newton_tol,
                newton_max_iters: cfg.newton_max_iters,
                ..MultiConfig::default()
            },
        )),
        AlgorithmId::Adf => Box::new(AdfLearner::new(cfg.prior)),
        AlgorithmId::Vb { samples } => Box::new(VbLearner::new(
            cfg.prior,
            VbConfig::new(samples, cfg.vb_seed),
        )),
        AlgorithmId::SgdAdagrad => Box::new(SgdAdagrad::new(cfg.sgd)),
    }
}

/// Ids of the benchmark table rows, in presentation order.
pub fn benchmark_ids() -> Vec<AlgorithmId> {
    vec![
        AlgorithmId::SgdAdagrad,
        AlgorithmId::Adf,
        AlgorithmId::DimGaussNewton,
        AlgorithmId::DimGaussTaylor,
        AlgorithmId::GaussNewtonLaplace,
        AlgorithmId::GaussNewtonPeak,
        AlgorithmId::GaussTaylorLaplace,
        AlgorithmId::GaussTaylorPeak,
        AlgorithmId::ProbitNewton,
        AlgorithmId::ProbitTaylor,
        AlgorithmId::Vb { samples: 100 },
        AlgorithmId::Vb { samples: 1000 },
    ]
}
