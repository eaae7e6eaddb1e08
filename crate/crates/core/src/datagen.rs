//! Synthetic stream generators with known ground-truth weights, plus the
//! line-delimited replay format.
//!
//! Weights, feature selection, and labels are drawn from three independent
//! sub-streams of one seeded ChaCha generator, so the true weights do not
//! change when the stream length does, and two generators with the same seed
//! emit identical sequences.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{ModelError, Result};
use crate::model::{FeatureId, Label, SparseExample};
use crate::special::{sigmoid, softplus};

const STREAM_WEIGHTS: u64 = 0;
const STREAM_FEATURES: u64 = 1;
const STREAM_LABELS: u64 = 2;

/// Within-category index distribution for categorical generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailSelector {
    /// P(index n) proportional to 1/(n+1)^exponent, n = 0..size-1.
    Zipf { exponent: f64 },
    /// P(index n) proportional to ratio^n; the long-tail alternative with a
    /// configurable decay ratio in (0, 1).
    Geometric { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSpec {
    /// Feature count per category; global ids are assigned contiguously.
    pub sizes: Vec<u64>,
    /// Distinct features drawn from each category per example.
    pub draws_per_category: u32,
    pub selector: TailSelector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenKind {
    /// Each of d features independently active with probability alpha,
    /// value 1 when active.
    RandomBinary { d: u64, alpha: f64 },
    /// Active with probability alpha, value uniform in [0, 1].
    RandomUniform { d: u64, alpha: f64 },
    /// Fixed number of features from each category, binary values.
    Categorical(CategoricalSpec),
}

impl GenKind {
    pub fn dimension(&self) -> u64 {
        match self {
            GenKind::RandomBinary { d, .. } | GenKind::RandomUniform { d, .. } => *d,
            GenKind::Categorical(spec) => spec.sizes.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub kind: GenKind,
    /// Standard deviation of the true log-odds weights.
    pub weight_std: f64,
    /// Optional per-category weight standard deviations (categorical kind).
    pub per_category_std: Option<Vec<f64>>,
    /// Stream length T.
    pub examples: u64,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            GenKind::RandomBinary { d, alpha } | GenKind::RandomUniform { d, alpha } => {
                if *d == 0 {
                    return Err(ModelError::Config("d must be positive".into()));
                }
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(ModelError::Config(format!(
                        "activation fraction must be in (0, 1], got {alpha}"
                    )));
                }
            }
            GenKind::Categorical(spec) => {
                if spec.sizes.is_empty() || spec.sizes.iter().any(|&s| s == 0) {
                    return Err(ModelError::Config("category sizes must be >= 1".into()));
                }
                if spec.draws_per_category == 0 {
                    return Err(ModelError::Config("draws per category must be >= 1".into()));
                }
                if u64::from(spec.draws_per_category) > spec.sizes.iter().copied().min().unwrap() {
                    return Err(ModelError::Config(
                        "draws per category exceeds the smallest category".into(),
                    ));
                }
                match spec.selector {
                    TailSelector::Zipf { exponent } => {
                        if !(exponent > 1.0) {
                            return Err(ModelError::Config(format!(
                                "zipf exponent must be > 1, got {exponent}"
                            )));
                        }
                    }
                    TailSelector::Geometric { ratio } => {
                        if !(ratio > 0.0 && ratio < 1.0) {
                            return Err(ModelError::Config(format!(
                                "geometric ratio must be in (0, 1), got {ratio}"
                            )));
                        }
                    }
                }
                if let Some(stds) = &self.per_category_std {
                    if stds.len() != spec.sizes.len() {
                        return Err(ModelError::Config(
                            "per-category stds must match the category count".into(),
                        ));
                    }
                }
            }
        }
        if !(self.weight_std.is_finite() && self.weight_std >= 0.0) {
            return Err(ModelError::Config(format!(
                "weight std must be >= 0, got {}",
                self.weight_std
            )));
        }
        Ok(())
    }
}

/// Ground-truth weights for regret comparators; reproducible from the seed.
#[derive(Debug, Clone)]
pub struct TrueModel {
    weights: Vec<f64>,
}

impl TrueModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn score(&self, ex: &SparseExample) -> f64 {
        ex.features()
            .iter()
            .map(|&(id, v)| v * self.weights[id.0 as usize])
            .sum()
    }
}

/// Draws the true weight vector from the config's weight prior.
pub fn gen_true_model(cfg: &GenConfig) -> Result<TrueModel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_WEIGHTS);
    let d = cfg.kind.dimension() as usize;
    let mut weights = Vec::with_capacity(d);
    match (&cfg.kind, &cfg.per_category_std) {
        (GenKind::Categorical(spec), Some(stds)) => {
            for (size, std) in spec.sizes.iter().zip(stds) {
                for _ in 0..*size {
                    let z: f64 = rng.sample(StandardNormal);
                    weights.push(z * std);
                }
            }
        }
        _ => {
            for _ in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                weights.push(z * cfg.weight_std);
            }
        }
    }
    Ok(TrueModel { weights })
}

/// Per-example comparator log loss ln(1 + exp(-y x^T w*)), natural log.
pub fn comparator_loss(model: &TrueModel, ex: &SparseExample) -> f64 {
    softplus(-ex.label().sign() * model.score(ex))
}

/// One example paired with its ground-truth comparator score x^T w*.
#[derive(Debug, Clone)]
pub struct SourcedExample {
    pub example: SparseExample,
    pub comparator_score: f64,
}

/// Anything the harness can stream examples from.
pub trait ExampleSource {
    fn next_example(&mut self) -> Option<Result<SourcedExample>>;
}

/// Inverse-CDF table over a finite index set.
#[derive(Debug, Clone)]
struct CumTable {
    cum: Vec<f64>,
}

impl CumTable {
    fn new(unnormalized: impl Iterator<Item = f64>) -> CumTable {
        let mut cum: Vec<f64> = unnormalized
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let total = *cum.last().expect("nonempty table");
        for c in &mut cum {
            *c /= total;
        }
        CumTable { cum }
    }

    fn sample(&self, u: f64) -> usize {
        self.cum.partition_point(|&c| c < u).min(self.cum.len() - 1)
    }
}

/// Streaming synthetic example generator.
pub struct StreamGenerator {
    cfg: GenConfig,
    model: TrueModel,
    rng_features: ChaCha8Rng,
    rng_labels: ChaCha8Rng,
    tables: Vec<(u64, CumTable)>, // categorical: (base id, within-category table)
    emitted: u64,
    draw_buf: Vec<u64>,
}

impl StreamGenerator {
    pub fn new(cfg: GenConfig) -> Result<Self> {
        cfg.validate()?;
        let model = gen_true_model(&cfg)?;
        let mut rng_features = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_features.set_stream(STREAM_FEATURES);
        let mut rng_labels = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_labels.set_stream(STREAM_LABELS);
        let mut tables = Vec::new();
        if let GenKind::Categorical(spec) = &cfg.kind {
            let mut base = 0u64;
            for &size in &spec.sizes {
                let table = match spec.selector {
                    TailSelector::Zipf { exponent } => {
                        CumTable::new((0..size).map(|n| ((n + 1) as f64).powf(-exponent)))
                    }
                    TailSelector::Geometric { ratio } => {
                        CumTable::new((0..size).map(|n| ratio.powi(n as i32)))
                    }
                };
                tables.push((base, table));
                base += size;
            }
        }
        Ok(StreamGenerator {
            cfg,
            model,
            rng_features,
            rng_labels,
            tables,
            emitted: 0,
            draw_buf: Vec::new(),
        })
    }

    pub fn true_model(&self) -> &TrueModel {
        &self.model
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    fn gen_features(&mut self) -> Vec<(FeatureId, f64)> {
        let mut features = Vec::new();
        match &self.cfg.kind {
            GenKind::RandomBinary { d, alpha } => {
                for i in 0..*d {
                    if self.rng_features.gen::<f64>() < *alpha {
                        features.push((FeatureId(i), 1.0));
                    }
                }
            }
            GenKind::RandomUniform { d, alpha } => {
                for i in 0..*d {
                    if self.rng_features.gen::<f64>() < *alpha {
                        features.push((FeatureId(i), self.rng_features.gen::<f64>()));
                    }
                }
            }
            GenKind::Categorical(spec) => {
                let draws = spec.draws_per_category;
                for (base, table) in &self.tables {
                    self.draw_buf.clear();
                    while self.draw_buf.len() < draws as usize {
                        let u = self.rng_features.gen::<f64>();
                        let n = table.sample(u) as u64;
                        if !self.draw_buf.contains(&n) {
                            self.draw_buf.push(n);
                        }
                    }
                    for &n in &self.draw_buf {
                        features.push((FeatureId(base + n), 1.0));
                    }
                }
            }
        }
        features
    }

    /// Draws the next example: features per the configured kind, label
    /// Bernoulli(Sigma(x^T w*)) mapped to {-1, +1}.
    pub fn gen_example(&mut self) -> Result<SourcedExample> {
        let features = self.gen_features();
        let score: f64 = features
            .iter()
            .map(|&(id, v)| v * self.model.weights[id.0 as usize])
            .sum();
        let label = if self.rng_labels.gen::<f64>() < sigmoid(score) {
            Label::Pos
        } else {
            Label::Neg
        };
        Ok(SourcedExample {
            example: SparseExample::new(features, label)?,
            comparator_score: score,
        })
    }
}

impl ExampleSource for StreamGenerator {
    fn next_example(&mut self) -> Option<Result<SourcedExample>> {
        if self.emitted >= self.cfg.examples {
            return None;
        }
        self.emitted += 1;
        Some(self.gen_example())
    }
}

/// Writes one example per line: `label<TAB>id:value,id:value,...`.
/// Values use the shortest exact decimal form, so a round trip is lossless.
pub fn write_replay_line<W: Write>(w: &mut W, ex: &SparseExample) -> Result<()> {
    let label = if ex.label() == Label::Pos { "+1" } else { "-1" };
    write!(w, "{label}\t")?;
    let mut first = true;
    for &(id, v) in ex.features() {
        if !first {
            write!(w, ",")?;
        }
        write!(w, "{id}:{v}")?;
        first = false;
    }
    writeln!(w)?;
    Ok(())
}

/// Parses one replay line; labels 1/+1/-1/0 accepted ({0,1} maps to signs).
pub fn parse_replay_line(line: &str, line_no: usize) -> Result<SparseExample> {
    let err = |msg: String| ModelError::Parse { line: line_no, msg };
    let mut parts = line.splitn(2, '\t');
    let label_str = parts.next().unwrap_or("").trim();
    let label = match label_str {
        "+1" | "1" => Label::Pos,
        "-1" | "0" => Label::Neg,
        other => return Err(err(format!("bad label {other:?}"))),
    };
    let mut features = Vec::new();
    if let Some(rest) = parts.next() {
        let rest = rest.trim();
        if !rest.is_empty() {
            for pair in rest.split(',') {
                let (id_str, val_str) = pair
                    .split_once(':')
                    .ok_or_else(|| err(format!("bad feature pair {pair:?}")))?;
                let id: u64 = id_str
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad feature id {id_str:?}")))?;
                let value: f64 = val_str
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad feature value {val_str:?}")))?;
                features.push((FeatureId(id), value));
            }
        }
    }
    SparseExample::new(features, label).map_err(|e| err(e.to_string()))
}

/// Replay-file source; comparator scores come from the optional true-weight
/// map (absent weights score 0, i.e. the zero comparator).
pub struct ReplaySource<R: BufRead> {
    reader: R,
    weights: Option<HashMap<u64, f64>>,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> ReplaySource<R> {
    pub fn new(reader: R, weights: Option<HashMap<u64, f64>>) -> Self {
        ReplaySource {
            reader,
            weights,
            line_no: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> ExampleSource for ReplaySource<R> {
    fn next_example(&mut self) -> Option<Result<SourcedExample>> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            return Some(parse_replay_line(line, self.line_no).map(|example| {
                let comparator_score = self.weights.as_ref().map_or(0.0, |w| {
                    example
                        .features()
                        .iter()
                        .map(|&(id, v)| v * w.get(&id.0).copied().unwrap_or(0.0))
                        .sum()
                });
                SourcedExample {
                    example,
                    comparator_score,
                }
            }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binary_cfg(seed: u64) -> GenConfig {
        GenConfig {
            kind: GenKind::RandomBinary { d: 50, alpha: 0.2 },
            weight_std: 1.0,
            per_category_std: None,
            examples: 500,
            seed,
        }
    }

    #[test]
    fn true_model_reproducible_and_zero_std() {
        let a = gen_true_model(&binary_cfg(9)).unwrap();
        let b = gen_true_model(&binary_cfg(9)).unwrap();
        assert_eq!(a.weights(), b.weights());
        let mut cfg = binary_cfg(9);
        cfg.weight_std = 0.0;
        let z = gen_true_model(&cfg).unwrap();
        assert!(z.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn true_model_sample_variance_near_one() {
        let cfg = GenConfig {
            kind: GenKind::RandomBinary { d: 100_000, alpha: 0.1 },
            weight_std: 1.0,
            per_category_std: None,
            examples: 1,
            seed: 3,
        };
        let m = gen_true_model(&cfg).unwrap();
        let n = m.weights().len() as f64;
        let mean: f64 = m.weights().iter().sum::<f64>() / n;
        let var: f64 = m.weights().iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
        assert!((0.98..=1.02).contains(&var), "sample variance {var}");
    }

    #[test]
    fn weights_do_not_depend_on_stream_length() {
        let mut short = binary_cfg(4);
        short.examples = 10;
        let mut long = binary_cfg(4);
        long.examples = 10_000;
        let a = StreamGenerator::new(short).unwrap();
        let b = StreamGenerator::new(long).unwrap();
        assert_eq!(a.true_model().weights(), b.true_model().weights());
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let mut a = StreamGenerator::new(binary_cfg(11)).unwrap();
        let mut b = StreamGenerator::new(binary_cfg(11)).unwrap();
        for _ in 0..200 {
            let ea = a.next_example().unwrap().unwrap();
            let eb = b.next_example().unwrap().unwrap();
            assert_eq!(ea.example, eb.example);
            assert_eq!(ea.comparator_score.to_bits(), eb.comparator_score.to_bits());
        }
    }

    #[test]
    fn value_ranges_by_kind() {
        let mut bin = StreamGenerator::new(binary_cfg(5)).unwrap();
        for _ in 0..100 {
            let e = bin.next_example().unwrap().unwrap();
            assert!(e.example.features().iter().all(|&(_, v)| v == 1.0));
        }
        let mut uni = StreamGenerator::new(GenConfig {
            kind: GenKind::RandomUniform { d: 50, alpha: 0.2 },
            weight_std: 1.0,
            per_category_std: None,
            examples: 100,
            seed: 5,
        })
        .unwrap();
        for _ in 0..100 {
            let e = uni.next_example().unwrap().unwrap();
            assert!(e.example.features().iter().all(|&(_, v)| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn activation_rate_converges_to_alpha() {
        let mut gen = StreamGenerator::new(GenConfig {
            kind: GenKind::RandomBinary { d: 200, alpha: 0.1 },
            weight_std: 1.0,
            per_category_std: None,
            examples: 2000,
            seed: 21,
        })
        .unwrap();
        let mut active = 0u64;
        let mut total = 0u64;
        while let Some(e) = gen.next_example() {
            active += e.unwrap().example.len() as u64;
            total += 200;
        }
        let rate = active as f64 / total as f64;
        let sigma = (0.1 * 0.9 / total as f64).sqrt();
        assert!((rate - 0.1).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn categorical_emits_exact_draws_and_zipf_frequencies() {
        let spec = CategoricalSpec {
            sizes: vec![4, 8],
            draws_per_category: 1,
            selector: TailSelector::Zipf { exponent: 1.75 },
        };
        let t = 1_000_000u64;
        let mut gen = StreamGenerator::new(GenConfig {
            kind: GenKind::Categorical(spec),
            weight_std: 2.0,
            per_category_std: None,
            examples: t,
            seed: 13,
        })
        .unwrap();
        let mut counts = vec![0u64; 4];
        while let Some(e) = gen.next_example() {
            let e = e.unwrap();
            assert_eq!(e.example.len(), 2);
            let first = e.example.features()[0].0;
            assert!(first.0 < 4);
            counts[first.0 as usize] += 1;
            assert!(e.example.features()[1].0 .0 >= 4);
        }
        // exact normalizer over (n+1)^-1.75, n = 0..3
        let weights: Vec<f64> = (0..4).map(|n| ((n + 1) as f64).powf(-1.75)).collect();
        let c: f64 = 1.0 / weights.iter().sum::<f64>();
        for (n, &count) in counts.iter().enumerate() {
            let expected = c * weights[n];
            let observed = count as f64 / t as f64;
            assert!(
                ((observed - expected) / expected).abs() < 0.01,
                "index {n}: observed {observed} expected {expected}"
            );
        }
    }

    #[test]
    fn comparator_loss_identities() {
        let cfg = binary_cfg(2);
        let model = gen_true_model(&cfg).unwrap();
        let ex = SparseExample::new(vec![], Label::Pos).unwrap();
        assert_relative_eq!(comparator_loss(&model, &ex), std::f64::consts::LN_2);
        let mut gen = StreamGenerator::new(cfg).unwrap();
        for _ in 0..200 {
            let e = gen.next_example().unwrap().unwrap();
            let loss = comparator_loss(&model, &e.example);
            let direct = -(sigmoid(e.example.label().sign() * e.comparator_score)).ln();
            assert_relative_eq!(loss, direct, epsilon = 1e-14, max_relative = 1e-14);
            // matching large score -> tiny loss
        }
    }

    #[test]
    fn replay_round_trip() {
        let mut gen = StreamGenerator::new(binary_cfg(8)).unwrap();
        let mut buf = Vec::new();
        let mut originals = Vec::new();
        for _ in 0..50 {
            let e = gen.next_example().unwrap().unwrap();
            write_replay_line(&mut buf, &e.example).unwrap();
            originals.push(e.example);
        }
        let mut src = ReplaySource::new(std::io::Cursor::new(buf), None);
        for orig in &originals {
            let parsed = src.next_example().unwrap().unwrap();
            assert_eq!(&parsed.example, orig);
            assert_eq!(parsed.comparator_score, 0.0);
        }
        assert!(src.next_example().is_none());
    }

    #[test]
    fn replay_accepts_binary_labels_and_empty_features() {
        let ex = parse_replay_line("0\t", 1).unwrap();
        assert_eq!(ex.label(), Label::Neg);
        assert!(ex.is_empty());
        let ex = parse_replay_line("1\t3:0.5,7:1", 1).unwrap();
        assert_eq!(ex.label(), Label::Pos);
        assert_eq!(ex.len(), 2);
        assert!(parse_replay_line("2\t", 1).is_err());
        assert!(parse_replay_line("+1\t3:abc", 4).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let mut cfg = binary_cfg(1);
        cfg.kind = GenKind::RandomBinary { d: 10, alpha: 0.0 };
        assert!(cfg.validate().is_err());
        let cfg = GenConfig {
            kind: GenKind::Categorical(CategoricalSpec {
                sizes: vec![4],
                draws_per_category: 1,
                selector: TailSelector::Zipf { exponent: 1.0 },
            }),
            weight_std: 1.0,
            per_category_std: None,
            examples: 1,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn geometric_selector_prefers_small_indices() {
        let mut gen = StreamGenerator::new(GenConfig {
            kind: GenKind::Categorical(CategoricalSpec {
                sizes: vec![16],
                draws_per_category: 1,
                selector: TailSelector::Geometric { ratio: 0.5 },
            }),
            weight_std: 1.0,
            per_category_std: None,
            examples: 20_000,
            seed: 31,
        })
        .unwrap();
        let mut counts = vec![0u64; 16];
        while let Some(e) = gen.next_example() {
            counts[e.unwrap().example.features()[0].0 .0 as usize] += 1;
        }
        assert!(counts[0] > counts[1] && counts[1] > counts[2]);
        let p0 = counts[0] as f64 / 20_000.0;
        assert!((p0 - 0.5).abs() < 0.02, "head mass {p0}");
    }
}
