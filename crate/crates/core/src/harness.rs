//! Progressive-validation regret accounting, hyperparameter grids, and CSV
//! emission.
//!
//! Every example is scored before the learner updates on it; the cumulative
//! regret is the learner's clamped log loss minus the comparator's, both
//! accumulated with compensated summation because ten million additions of
//! milli-nat terms would otherwise lose digits.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::datagen::ExampleSource;
use crate::error::{ModelError, Result};
use crate::learner::OnlineLearner;
use crate::special::softplus;

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Regret checkpoint at round t (t >= 2 so the normalization is defined).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub regret: f64,
    pub regret_over_log_t: f64,
}

/// Cumulative regret trajectory of one run.
#[derive(Debug, Clone)]
pub struct RegretSeries {
    pub checkpoints: Vec<Checkpoint>,
    pub final_t: u64,
    pub final_regret: f64,
    pub learner_loss: f64,
    pub comparator_loss: f64,
    pub warnings: u64,
}

impl RegretSeries {
    /// Final regret coefficient R_T / ln T.
    pub fn regret_coefficient(&self) -> f64 {
        self.final_regret / (self.final_t as f64).ln()
    }
}

/// When to record checkpoints.
#[derive(Debug, Clone)]
pub enum Schedule {
    /// t = ceil(ratio^k), deduplicated; keeps files small over 10^7 rounds.
    Geometric { ratio: f64 },
    /// Explicit times (sorted and deduplicated on use).
    Explicit(Vec<u64>),
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Geometric { ratio: 1.25 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Geometric { ratio } => {
                if !(*ratio > 1.0 && ratio.is_finite()) {
                    return Err(ModelError::Config(format!(
                        "geometric checkpoint ratio must be > 1, got {ratio}"
                    )));
                }
            }
            Schedule::Explicit(times) => {
                if times.is_empty() {
                    return Err(ModelError::Config("empty checkpoint schedule".into()));
                }
            }
        }
        Ok(())
    }

    /// Strictly increasing checkpoint times, starting at t = 2.
    fn times(&self) -> Box<dyn Iterator<Item = u64>> {
        match self {
            Schedule::Geometric { ratio } => {
                let ratio = *ratio;
                let mut last = 1u64;
                let mut k = 0u32;
                Box::new(std::iter::from_fn(move || loop {
                    let v = ratio.powi(k as i32).ceil() as u64;
                    k += 1;
                    if v > last {
                        last = v;
                        return Some(v);
                    }
                    if k > 10_000 {
                        return None;
                    }
                }))
            }
            Schedule::Explicit(times) => {
                let mut sorted: Vec<u64> = times.iter().copied().filter(|&t| t >= 2).collect();
                sorted.sort_unstable();
                sorted.dedup();
                Box::new(sorted.into_iter())
            }
        }
    }
}

/// Runs the online protocol over a source: predict, account, update.
///
/// I/O failures abort; numeric warnings from the learner are counted in the
/// result instead. The final round is always recorded as a checkpoint.
pub fn run_stream(
    learner: &mut dyn OnlineLearner,
    source: &mut dyn ExampleSource,
    schedule: &Schedule,
) -> Result<RegretSeries> {
    schedule.validate()?;
    let mut learner_loss = KahanSum::new();
    let mut comparator_loss = KahanSum::new();
    let mut regret = KahanSum::new();
    let mut checkpoints = Vec::new();
    let mut times = schedule.times();
    let mut next_cp = times.next();
    let mut t = 0u64;
    while let Some(item) = source.next_example() {
        let sourced = item?;
        t += 1;
        let prediction = learner.process_example(&sourced.example)?;
        let loss = prediction.log_loss();
        let comp = softplus(-sourced.example.label().sign() * sourced.comparator_score);
        learner_loss.add(loss);
        comparator_loss.add(comp);
        regret.add(loss - comp);
        while let Some(cp) = next_cp {
            if cp > t {
                break;
            }
            if cp == t {
                checkpoints.push(Checkpoint {
                    t,
                    regret: regret.value(),
                    regret_over_log_t: regret.value() / (t as f64).ln(),
                });
            }
            next_cp = times.next();
        }
    }
    if t >= 2 && checkpoints.last().map_or(true, |c| c.t != t) {
        checkpoints.push(Checkpoint {
            t,
            regret: regret.value(),
            regret_over_log_t: regret.value() / (t as f64).ln(),
        });
    }
    Ok(RegretSeries {
        checkpoints,
        final_t: t,
        final_regret: regret.value(),
        learner_loss: learner_loss.value(),
        comparator_loss: comparator_loss.value(),
        warnings: learner.warning_count(),
    })
}

/// Least-squares slope of R_t/ln t against ln t over checkpoints in
/// [t_lo, t_hi], plus the mean level over the same window. A learner with
/// logarithmic regret flattens here: the slope is a small fraction of the
/// level.
pub fn normalized_regret_slope(
    series: &RegretSeries,
    t_lo: u64,
    t_hi: u64,
) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = series
        .checkpoints
        .iter()
        .filter(|c| c.t >= t_lo && c.t <= t_hi)
        .map(|c| ((c.t as f64).ln(), c.regret_over_log_t))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some((sxy / sxx, mean_y))
}

/// Writes the checkpoint trajectory as CSV. Values use the shortest exact
/// decimal form, so parsing the file back reproduces the in-memory numbers
/// bit for bit.
pub fn write_series_csv<W: Write>(w: &mut W, series: &RegretSeries) -> Result<()> {
    writeln!(w, "t,regret,regret_over_log_t")?;
    for c in &series.checkpoints {
        writeln!(w, "{},{},{}", c.t, c.regret, c.regret_over_log_t)?;
    }
    Ok(())
}

/// Parses a series CSV written by [`write_series_csv`].
pub fn read_series_csv<R: BufRead>(r: R) -> Result<Vec<Checkpoint>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "t,regret,regret_over_log_t" {
                return Err(ModelError::Parse {
                    line: 1,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let err = |msg: String| ModelError::Parse { line: i + 1, msg };
        let t = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad t".into()))?;
        let regret = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad regret".into()))?;
        let regret_over_log_t = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad normalized regret".into()))?;
        out.push(Checkpoint {
            t,
            regret,
            regret_over_log_t,
        });
    }
    Ok(out)
}

/// One axis of a hyperparameter lattice.
#[derive(Debug, Clone)]
pub struct GridAxis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Outcome of one lattice point.
#[derive(Debug, Clone)]
pub struct GridPointResult {
    pub params: Vec<(String, f64)>,
    pub regret_coefficient: Option<f64>,
    pub warnings: u64,
    pub error: Option<String>,
}

/// Runs `run_point` for every lattice point, in parallel. Failures are
/// recorded per point and do not stop the grid. Results come back sorted by
/// regret coefficient (failed runs last), then by parameter values, so the
/// output does not depend on execution order.
pub fn grid_search<F>(axes: &[GridAxis], run_point: F) -> Result<Vec<GridPointResult>>
where
    F: Fn(&[(String, f64)]) -> Result<RegretSeries> + Sync,
{
    for axis in axes {
        if axis.values.is_empty() {
            return Err(ModelError::Config(format!(
                "grid axis {:?} has no values",
                axis.param
            )));
        }
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let points: Vec<Vec<(String, f64)>> = (0..total)
        .map(|mut idx| {
            let mut point = Vec::with_capacity(axes.len());
            for axis in axes {
                let k = idx % axis.values.len();
                idx /= axis.values.len();
                point.push((axis.param.clone(), axis.values[k]));
            }
            point
        })
        .collect();
    let mut results: Vec<GridPointResult> = points
        .par_iter()
        .map(|point| match run_point(point) {
            Ok(series) => GridPointResult {
                params: point.clone(),
                regret_coefficient: Some(series.regret_coefficient()),
                warnings: series.warnings,
                error: None,
            },
            Err(e) => GridPointResult {
                params: point.clone(),
                regret_coefficient: None,
                warnings: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    results.sort_by(|a, b| {
        let ka = a.regret_coefficient.unwrap_or(f64::INFINITY);
        let kb = b.regret_coefficient.unwrap_or(f64::INFINITY);
        ka.partial_cmp(&kb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                a.params
                    .iter()
                    .map(|(_, v)| v)
                    .partial_cmp(b.params.iter().map(|(_, v)| v))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    Ok(results)
}

/// Writes grid results as CSV: one column per parameter, then `r_T`.
/// Failed points emit `nan`.
pub fn write_grid_csv<W: Write>(w: &mut W, results: &[GridPointResult]) -> Result<()> {
    if results.is_empty() {
        writeln!(w, "r_T")?;
        return Ok(());
    }
    let names: Vec<&str> = results[0].params.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(w, "{},r_T", names.join(","))?;
    for row in results {
        for (_, v) in &row.params {
            write!(w, "{v},")?;
        }
        match row.regret_coefficient {
            Some(r) => writeln!(w, "{r}")?,
            None => writeln!(w, "nan")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{
        comparator_loss, gen_true_model, GenConfig, GenKind, SourcedExample, StreamGenerator,
        TrueModel,
    };
    use crate::model::{Label, SparseExample};
    use crate::special::{sigmoid, Prediction};
    use approx::assert_relative_eq;

    /// Fixed oracle that predicts with the true generating weights.
    struct OracleLearner {
        model: TrueModel,
    }

    impl OnlineLearner for OracleLearner {
        fn process_example(&mut self, ex: &SparseExample) -> crate::error::Result<Prediction> {
            self.predict(ex)
        }
        fn predict(&self, ex: &SparseExample) -> crate::error::Result<Prediction> {
            Ok(Prediction::new(sigmoid(
                ex.label().sign() * self.model.score(ex),
            )))
        }
    }

    struct ConstantHalf;

    impl OnlineLearner for ConstantHalf {
        fn process_example(&mut self, _: &SparseExample) -> crate::error::Result<Prediction> {
            Ok(Prediction::new(0.5))
        }
        fn predict(&self, _: &SparseExample) -> crate::error::Result<Prediction> {
            Ok(Prediction::new(0.5))
        }
    }

    fn small_cfg(seed: u64) -> GenConfig {
        GenConfig {
            kind: GenKind::RandomBinary { d: 40, alpha: 0.2 },
            weight_std: 1.0,
            per_category_std: None,
            examples: 3000,
            seed,
        }
    }

    #[test]
    fn oracle_learner_has_zero_regret() {
        let cfg = small_cfg(1);
        let model = gen_true_model(&cfg).unwrap();
        let mut learner = OracleLearner { model };
        let mut source = StreamGenerator::new(cfg).unwrap();
        let series = run_stream(&mut learner, &mut source, &Schedule::default()).unwrap();
        assert!(
            series.final_regret.abs() < 1e-9,
            "oracle regret {}",
            series.final_regret
        );
    }

    #[test]
    fn constant_half_vs_zero_comparator_has_zero_regret() {
        struct ZeroScoreSource {
            inner: StreamGenerator,
        }
        impl crate::datagen::ExampleSource for ZeroScoreSource {
            fn next_example(&mut self) -> Option<crate::error::Result<SourcedExample>> {
                self.inner.next_example().map(|r| {
                    r.map(|mut s| {
                        s.comparator_score = 0.0;
                        s
                    })
                })
            }
        }
        let mut source = ZeroScoreSource {
            inner: StreamGenerator::new(small_cfg(2)).unwrap(),
        };
        let mut learner = ConstantHalf;
        let series = run_stream(&mut learner, &mut source, &Schedule::default()).unwrap();
        assert_eq!(series.final_regret, 0.0);
    }

    #[test]
    fn loss_decomposition_holds_at_final_checkpoint() {
        let cfg = small_cfg(3);
        let mut learner = crate::learner::build_learner(
            crate::learner::AlgorithmId::GaussTaylorLaplace,
            &crate::learner::AlgorithmConfig::default(),
        );
        let mut source = StreamGenerator::new(cfg).unwrap();
        let series = run_stream(learner.as_mut(), &mut source, &Schedule::default()).unwrap();
        let recomposed = series.comparator_loss + series.final_regret;
        assert_relative_eq!(series.learner_loss, recomposed, max_relative = 1e-9);
        assert!(series.final_regret > 0.0);
    }

    #[test]
    fn checkpoints_strictly_increase_and_end_at_final_round() {
        let cfg = small_cfg(4);
        let mut learner = ConstantHalf;
        let mut source = StreamGenerator::new(cfg).unwrap();
        let series = run_stream(&mut learner, &mut source, &Schedule::default()).unwrap();
        for w in series.checkpoints.windows(2) {
            assert!(w[0].t < w[1].t);
        }
        assert_eq!(series.checkpoints.last().unwrap().t, 3000);
        assert_eq!(series.final_t, 3000);
        assert!(series.checkpoints[0].t >= 2);
    }

    #[test]
    fn comparator_loss_matches_source_scores() {
        let cfg = small_cfg(5);
        let model = gen_true_model(&cfg).unwrap();
        let mut source = StreamGenerator::new(cfg).unwrap();
        use crate::datagen::ExampleSource;
        for _ in 0..100 {
            let s = source.next_example().unwrap().unwrap();
            let direct = comparator_loss(&model, &s.example);
            let via_score =
                crate::special::softplus(-s.example.label().sign() * s.comparator_score);
            assert_relative_eq!(direct, via_score, max_relative = 1e-12);
        }
    }

    #[test]
    fn series_csv_round_trips_exactly() {
        let series = RegretSeries {
            checkpoints: vec![
                Checkpoint {
                    t: 2,
                    regret: 0.123456789012345678,
                    regret_over_log_t: 0.1781,
                },
                Checkpoint {
                    t: 1_000_000,
                    regret: 1073.3366,
                    regret_over_log_t: 77.69,
                },
            ],
            final_t: 1_000_000,
            final_regret: 1073.3366,
            learner_loss: 0.0,
            comparator_loss: 0.0,
            warnings: 0,
        };
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &series).unwrap();
        let parsed = read_series_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(parsed.len(), 2);
        for (a, b) in parsed.iter().zip(&series.checkpoints) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.regret.to_bits(), b.regret.to_bits());
            assert_eq!(a.regret_over_log_t.to_bits(), b.regret_over_log_t.to_bits());
        }
    }

    #[test]
    fn empty_series_emits_header_only() {
        let series = RegretSeries {
            checkpoints: vec![],
            final_t: 0,
            final_regret: 0.0,
            learner_loss: 0.0,
            comparator_loss: 0.0,
            warnings: 0,
        };
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &series).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,regret,regret_over_log_t\n");
    }

    #[test]
    fn geometric_schedule_is_deduplicated_and_increasing() {
        let s = Schedule::Geometric { ratio: 1.25 };
        let times: Vec<u64> = s.times().take(20).collect();
        for w in times.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(times[0], 2);
    }

    #[test]
    fn singleton_grid_matches_run_stream() {
        let axes = vec![GridAxis {
            param: "prior-var".into(),
            values: vec![1.0],
        }];
        let run = |params: &[(String, f64)]| {
            let mut cfg = crate::learner::AlgorithmConfig::default();
            for (name, value) in params {
                assert_eq!(name, "prior-var");
                cfg.prior.variance = *value;
            }
            let mut learner =
                crate::learner::build_learner(crate::learner::AlgorithmId::GaussTaylorLaplace, &cfg);
            let mut source = StreamGenerator::new(small_cfg(6)).unwrap();
            run_stream(learner.as_mut(), &mut source, &Schedule::default())
        };
        let results = grid_search(&axes, run).unwrap();
        assert_eq!(results.len(), 1);
        let direct = run(&[("prior-var".into(), 1.0)]).unwrap();
        assert_eq!(
            results[0].regret_coefficient.unwrap().to_bits(),
            direct.regret_coefficient().to_bits()
        );
    }

    #[test]
    fn grid_is_deterministic_and_sorted() {
        let axes = vec![
            GridAxis {
                param: "prior-var".into(),
                values: vec![0.5, 1.0, 2.0],
            },
            GridAxis {
                param: "prior-mean".into(),
                values: vec![0.0, 0.5],
            },
        ];
        let run = |params: &[(String, f64)]| {
            let mut cfg = crate::learner::AlgorithmConfig::default();
            for (name, value) in params {
                match name.as_str() {
                    "prior-var" => cfg.prior.variance = *value,
                    "prior-mean" => cfg.prior.mean = *value,
                    _ => unreachable!(),
                }
            }
            let mut learner =
                crate::learner::build_learner(crate::learner::AlgorithmId::GaussTaylorLaplace, &cfg);
            let mut source = StreamGenerator::new(small_cfg(7)).unwrap();
            run_stream(learner.as_mut(), &mut source, &Schedule::default())
        };
        let a = grid_search(&axes, run).unwrap();
        let b = grid_search(&axes, run).unwrap();
        assert_eq!(a.len(), 6);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.params, rb.params);
            assert_eq!(
                ra.regret_coefficient.unwrap().to_bits(),
                rb.regret_coefficient.unwrap().to_bits()
            );
        }
        for w in a.windows(2) {
            assert!(
                w[0].regret_coefficient.unwrap() <= w[1].regret_coefficient.unwrap()
            );
        }
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("prior-var,prior-mean,r_T\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn grid_records_individual_failures_and_continues() {
        let axes = vec![GridAxis {
            param: "prior-var".into(),
            values: vec![-1.0, 1.0],
        }];
        let run = |params: &[(String, f64)]| {
            let v = params[0].1;
            if v <= 0.0 {
                return Err(ModelError::Config("bad prior".into()));
            }
            let mut learner = crate::learner::build_learner(
                crate::learner::AlgorithmId::GaussTaylorLaplace,
                &crate::learner::AlgorithmConfig::default(),
            );
            let mut source = StreamGenerator::new(small_cfg(8)).unwrap();
            run_stream(learner.as_mut(), &mut source, &Schedule::default())
        };
        let results = grid_search(&axes, run).unwrap();
        assert_eq!(results.len(), 2);
        assert!(results[0].error.is_none());
        assert!(results[1].error.is_some());
        assert!(results[1].regret_coefficient.is_none());
    }
}
