//! Declarative TOML run configuration. Every field mirrors a command-line
//! flag; flags override file values.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    #[serde(default)]
    pub gen: GenSection,
    #[serde(default)]
    pub algo: AlgoSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GenSection {
    pub kind: Option<String>,
    pub d: Option<u64>,
    pub alpha: Option<f64>,
    pub weight_std: Option<f64>,
    pub examples: Option<u64>,
    pub cat_sizes: Option<Vec<u64>>,
    pub cat_draws: Option<u32>,
    pub zipf_exponent: Option<f64>,
    pub decay_ratio: Option<f64>,
    pub per_category_std: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AlgoSection {
    pub id: Option<String>,
    pub prior_mean: Option<f64>,
    pub prior_var: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iters: Option<u32>,
    pub eta: Option<f64>,
    pub l2: Option<f64>,
    pub adagrad_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunSection {
    pub checkpoint_ratio: Option<f64>,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}
