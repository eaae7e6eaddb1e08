//! Command-line benchmark harness: synthetic streams, single runs,
//! hyperparameter grids, timing comparisons, and quadrature cross-checks.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use obayes::datagen::{
    CategoricalSpec, ExampleSource, GenConfig, GenKind, ReplaySource, StreamGenerator,
    TailSelector,
};
use obayes::harness::{
    grid_search, normalized_regret_slope, run_stream, write_grid_csv, write_series_csv, GridAxis,
    RegretSeries, Schedule,
};
use obayes::learner::{build_learner, AlgorithmConfig, AlgorithmId};
use obayes::special::{quadrature_mixture, shrunk_prediction, ShrinkKind};
use obayes::{Label, PriorConfig};

use config::FileConfig;

/// Mixes the run seed into an independent stream for the VB sampler so data
/// and sampler draws never share a generator.
const VB_SEED_SALT: u64 = 0x9e3779b97f4a7c15;

#[derive(Parser)]
#[command(
    name = "obayes",
    version,
    about = "Benchmark harness for sparse online Bayesian logistic/probit regression"
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream and write it in replay format.
    Simulate(SimulateArgs),
    /// Run one algorithm over a generated or replayed stream; write the
    /// regret trajectory as CSV.
    Run(RunArgs),
    /// Sweep a hyperparameter lattice, one run per point.
    Grid(GridArgs),
    /// Time algorithms on the same stream and report throughput and regret.
    Bench(BenchArgs),
    /// Cross-check closed-form predictions against numerical quadrature.
    Oracle(OracleArgs),
}

#[derive(Args, Clone, Default)]
struct GenArgs {
    /// Generator kind: random_binary | random_uniform | categorical_zipf |
    /// categorical_geometric.
    #[arg(long)]
    gen: Option<String>,
    /// Feature-space dimension d (random kinds).
    #[arg(long)]
    d: Option<u64>,
    /// Per-feature activation probability.
    #[arg(long)]
    alpha: Option<f64>,
    /// Standard deviation of the true log-odds weights.
    #[arg(long = "weight-std")]
    weight_std: Option<f64>,
    /// Stream length T.
    #[arg(long = "T", alias = "examples")]
    examples: Option<u64>,
    /// Comma-separated category sizes (categorical kinds).
    #[arg(long = "cat-sizes")]
    cat_sizes: Option<String>,
    /// Features drawn per category per example.
    #[arg(long = "cat-draws")]
    cat_draws: Option<u32>,
    /// Zipf exponent for categorical_zipf.
    #[arg(long = "zipf-exponent", alias = "zipf-s")]
    zipf_exponent: Option<f64>,
    /// Decay ratio for categorical_geometric.
    #[arg(long = "decay-ratio")]
    decay_ratio: Option<f64>,
    /// Comma-separated per-category weight stds (categorical kinds).
    #[arg(long = "per-category-std")]
    per_category_std: Option<String>,
}

#[derive(Args, Clone, Default)]
struct AlgoArgs {
    /// Algorithm id, e.g. gauss-taylor-laplace, dimgauss-newton, adf,
    /// vb-1000, sgd-adagrad.
    #[arg(long)]
    algo: Option<String>,
    /// Prior mean mu_0.
    #[arg(long = "prior-mean")]
    prior_mean: Option<f64>,
    /// Prior variance sigma_0^2.
    #[arg(long = "prior-var")]
    prior_var: Option<f64>,
    /// Newton convergence threshold.
    #[arg(long = "newton-tol")]
    newton_tol: Option<f64>,
    /// Newton iteration budget.
    #[arg(long = "newton-max-iters")]
    newton_max_iters: Option<u32>,
    /// SGD learning rate.
    #[arg(long)]
    eta: Option<f64>,
    /// SGD L2 regularization.
    #[arg(long)]
    l2: Option<f64>,
    /// AdaGrad epsilon.
    #[arg(long = "adagrad-epsilon")]
    adagrad_epsilon: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    gen: GenArgs,
    /// RNG seed (required for anything stochastic).
    #[arg(long)]
    seed: Option<u64>,
    /// Output replay file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the true weights as CSV (id,weight).
    #[arg(long = "weights-out")]
    weights_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    gen: GenArgs,
    /// Replay an existing stream instead of generating one.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// True weights CSV for the replay comparator.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV with columns t,regret,regret_over_log_t.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Geometric checkpoint ratio.
    #[arg(long = "checkpoint-ratio")]
    checkpoint_ratio: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    gen: GenArgs,
    /// Grid axis `name=v1,v2,...`; repeatable. Names: prior-var, prior-mean,
    /// eta, l2, seed.
    #[arg(long = "axis")]
    axes: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV with one row per lattice point.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated algorithm ids (default: the full benchmark set
    /// minus the VB rows, which are orders of magnitude slower).
    #[arg(long)]
    algos: Option<String>,
    #[command(flatten)]
    algo_cfg: AlgoArgs,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Likelihood kind: logistic | probit | both.
    #[arg(long, default_value = "both")]
    kind: String,
    /// Mean grid: lo,hi,steps.
    #[arg(long = "mean-grid", default_value = "-4,4,41")]
    mean_grid: String,
    /// Variance grid: lo,hi,steps.
    #[arg(long = "var-grid", default_value = "0,10,41")]
    var_grid: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let file_cfg = match &cli.config {
        Some(path) => match config::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
        },
        None => FileConfig::default(),
    };
    match dispatch(cli.command, &file_cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// Marker for configuration mistakes (exit code 1, vs 2 for runtime errors).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

fn dispatch(cmd: Command, file: &FileConfig) -> Result<()> {
    match cmd {
        Command::Simulate(args) => simulate(args, file),
        Command::Run(args) => run(args, file),
        Command::Grid(args) => grid(args, file),
        Command::Bench(args) => bench(args, file),
        Command::Oracle(args) => oracle(args),
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| config_err(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

/// Resolves an output path against OBAYES_OUT_DIR for relative paths.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("OBAYES_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn require_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    flag.or(file.seed)
        .ok_or_else(|| config_err("--seed is required for stochastic commands"))
}

fn build_gen_config(args: &GenArgs, file: &FileConfig, seed: u64) -> Result<GenConfig> {
    let kind_name = args
        .gen
        .clone()
        .or_else(|| file.gen.kind.clone())
        .ok_or_else(|| config_err("--gen is required (or [gen].kind in the config file)"))?;
    let examples = args
        .examples
        .or(file.gen.examples)
        .ok_or_else(|| config_err("--T is required"))?;
    let weight_std = args.weight_std.or(file.gen.weight_std).unwrap_or(1.0);
    let cat_spec = |selector: TailSelector| -> Result<GenKind> {
        let sizes = match (&args.cat_sizes, &file.gen.cat_sizes) {
            (Some(s), _) => parse_list::<u64>(s, "category size")?,
            (None, Some(v)) => v.clone(),
            (None, None) => {
                return Err(config_err("--cat-sizes is required for categorical kinds"))
            }
        };
        Ok(GenKind::Categorical(CategoricalSpec {
            sizes,
            draws_per_category: args.cat_draws.or(file.gen.cat_draws).unwrap_or(1),
            selector,
        }))
    };
    let kind = match kind_name.as_str() {
        "random_binary" | "random_uniform" => {
            let d = args
                .d
                .or(file.gen.d)
                .ok_or_else(|| config_err("--d is required for random kinds"))?;
            let alpha = args
                .alpha
                .or(file.gen.alpha)
                .ok_or_else(|| config_err("--alpha is required for random kinds"))?;
            if kind_name == "random_binary" {
                GenKind::RandomBinary { d, alpha }
            } else {
                GenKind::RandomUniform { d, alpha }
            }
        }
        "categorical_zipf" => cat_spec(TailSelector::Zipf {
            exponent: args
                .zipf_exponent
                .or(file.gen.zipf_exponent)
                .unwrap_or(1.75),
        })?,
        "categorical_geometric" => cat_spec(TailSelector::Geometric {
            ratio: args.decay_ratio.or(file.gen.decay_ratio).ok_or_else(|| {
                config_err("--decay-ratio is required for categorical_geometric")
            })?,
        })?,
        other => return Err(config_err(format!("unknown generator kind {other:?}"))),
    };
    let per_category_std = match (&args.per_category_std, &file.gen.per_category_std) {
        (Some(s), _) => Some(parse_list::<f64>(s, "per-category std")?),
        (None, Some(v)) => Some(v.clone()),
        (None, None) => None,
    };
    let cfg = GenConfig {
        kind,
        weight_std,
        per_category_std,
        examples,
        seed,
    };
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(cfg)
}

fn build_algo(
    args: &AlgoArgs,
    file: &FileConfig,
    seed: u64,
) -> Result<(AlgorithmId, AlgorithmConfig)> {
    let id_str = args
        .algo
        .clone()
        .or_else(|| file.algo.id.clone())
        .ok_or_else(|| config_err("--algo is required (or [algo].id in the config file)"))?;
    let id = AlgorithmId::from_str(&id_str).map_err(|e| config_err(e.to_string()))?;
    let mut cfg = AlgorithmConfig::default();
    cfg.prior = PriorConfig::new(
        args.prior_mean.or(file.algo.prior_mean).unwrap_or(0.0),
        args.prior_var.or(file.algo.prior_var).unwrap_or(1.0),
    )
    .map_err(|e| config_err(e.to_string()))?;
    cfg.newton_tol = args.newton_tol.or(file.algo.newton_tol).unwrap_or(1e-10);
    cfg.newton_max_iters = args
        .newton_max_iters
        .or(file.algo.newton_max_iters)
        .unwrap_or(50);
    cfg.sgd.learning_rate = args.eta.or(file.algo.eta).unwrap_or(0.3);
    cfg.sgd.l2 = args.l2.or(file.algo.l2).unwrap_or(0.0);
    cfg.sgd.adagrad_epsilon = args
        .adagrad_epsilon
        .or(file.algo.adagrad_epsilon)
        .unwrap_or(1e-6);
    cfg.vb_seed = seed ^ VB_SEED_SALT;
    Ok((id, cfg))
}

fn schedule_from(args_ratio: Option<f64>, file: &FileConfig) -> Schedule {
    match args_ratio.or(file.run.checkpoint_ratio) {
        Some(r) => Schedule::Geometric { ratio: r },
        None => Schedule::default(),
    }
}

fn simulate(args: SimulateArgs, file: &FileConfig) -> Result<()> {
    let seed = require_seed(args.seed, file)?;
    let gen_cfg = build_gen_config(&args.gen, file, seed)?;
    let out = args
        .out
        .map(|p| resolve_out(&p))
        .or_else(|| file.out.as_ref().map(|s| resolve_out(Path::new(s))))
        .ok_or_else(|| config_err("--out is required"))?;
    let mut generator = StreamGenerator::new(gen_cfg)?;
    if let Some(wpath) = &args.weights_out {
        let wpath = resolve_out(wpath);
        let mut w = BufWriter::new(File::create(&wpath).context("creating weights file")?);
        writeln!(w, "id,weight")?;
        for (i, value) in generator.true_model().weights().iter().enumerate() {
            writeln!(w, "{i},{value}")?;
        }
    }
    let mut w = BufWriter::new(File::create(&out).context("creating output file")?);
    let mut count = 0u64;
    while let Some(item) = generator.next_example() {
        let sourced = item?;
        obayes::datagen::write_replay_line(&mut w, &sourced.example)?;
        count += 1;
    }
    w.flush()?;
    println!("wrote {count} examples to {}", out.display());
    Ok(())
}

fn read_weights_csv(path: &Path) -> Result<std::collections::HashMap<u64, f64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut map = std::collections::HashMap::new();
    for (i, line) in std::io::BufRead::lines(BufReader::new(file)).enumerate() {
        let line = line?;
        if i == 0 && line.trim() == "id,weight" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, w) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("bad weights line {}: {line:?}", i + 1))?;
        map.insert(id.trim().parse()?, w.trim().parse()?);
    }
    Ok(map)
}

fn run(args: RunArgs, file: &FileConfig) -> Result<()> {
    let seed = require_seed(args.seed, file)?;
    let (id, algo_cfg) = build_algo(&args.algo, file, seed)?;
    let out = args
        .out
        .map(|p| resolve_out(&p))
        .or_else(|| file.out.as_ref().map(|s| resolve_out(Path::new(s))))
        .ok_or_else(|| config_err("--out is required"))?;
    let schedule = schedule_from(args.checkpoint_ratio, file);
    let mut learner = build_learner(id, &algo_cfg);
    let series = match &args.replay {
        Some(path) => {
            let weights = args.weights.as_deref().map(read_weights_csv).transpose()?;
            let reader = BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            );
            let mut source = ReplaySource::new(reader, weights);
            run_stream(learner.as_mut(), &mut source, &schedule)?
        }
        None => {
            let gen_cfg = build_gen_config(&args.gen, file, seed)?;
            let mut source = StreamGenerator::new(gen_cfg)?;
            run_stream(learner.as_mut(), &mut source, &schedule)?
        }
    };
    let mut w = BufWriter::new(File::create(&out).context("creating output file")?);
    write_series_csv(&mut w, &series)?;
    w.flush()?;
    print_run_summary(&id.to_string(), &series);
    Ok(())
}

fn print_run_summary(name: &str, series: &RegretSeries) {
    println!(
        "{name}: T={} regret={:.6} r_T={:.6} warnings={}",
        series.final_t,
        series.final_regret,
        series.regret_coefficient(),
        series.warnings
    );
    if let Some((slope, level)) =
        normalized_regret_slope(series, series.final_t / 10, series.final_t)
    {
        println!("  normalized-regret slope over final decade: {slope:.4} (level {level:.3})");
    }
}

fn grid(args: GridArgs, file: &FileConfig) -> Result<()> {
    let seed = require_seed(args.seed, file)?;
    if args.axes.is_empty() {
        return Err(config_err("at least one --axis name=v1,v2,... is required"));
    }
    let (id, base_cfg) = build_algo(&args.algo, file, seed)?;
    let base_gen = build_gen_config(&args.gen, file, seed)?;
    let out = args
        .out
        .map(|p| resolve_out(&p))
        .or_else(|| file.out.as_ref().map(|s| resolve_out(Path::new(s))))
        .ok_or_else(|| config_err("--out is required"))?;
    let mut axes = Vec::new();
    for spec in &args.axes {
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| config_err(format!("bad --axis {spec:?}, expected name=v1,v2")))?;
        match name {
            "prior-var" | "prior-mean" | "eta" | "l2" | "seed" => {}
            other => return Err(config_err(format!("unknown grid parameter {other:?}"))),
        }
        axes.push(GridAxis {
            param: name.to_string(),
            values: parse_list::<f64>(values, "axis value")?,
        });
    }
    let results = grid_search(&axes, |point| {
        let mut cfg = base_cfg;
        let mut gen_cfg = base_gen.clone();
        for (name, value) in point {
            match name.as_str() {
                "prior-var" => cfg.prior.variance = *value,
                "prior-mean" => cfg.prior.mean = *value,
                "eta" => cfg.sgd.learning_rate = *value,
                "l2" => cfg.sgd.l2 = *value,
                "seed" => {
                    gen_cfg.seed = *value as u64;
                    cfg.vb_seed = gen_cfg.seed ^ VB_SEED_SALT;
                }
                _ => unreachable!("axis names validated above"),
            }
        }
        let mut learner = build_learner(id, &cfg);
        let mut source = StreamGenerator::new(gen_cfg)?;
        run_stream(learner.as_mut(), &mut source, &Schedule::default())
    })?;
    let mut w = BufWriter::new(File::create(&out).context("creating output file")?);
    write_grid_csv(&mut w, &results)?;
    w.flush()?;
    for r in &results {
        let params: Vec<String> = r.params.iter().map(|(n, v)| format!("{n}={v}")).collect();
        match (r.regret_coefficient, &r.error) {
            (Some(rt), _) => println!("{}: r_T={rt:.4}", params.join(" ")),
            (None, Some(e)) => println!("{}: failed: {e}", params.join(" ")),
            (None, None) => {}
        }
    }
    Ok(())
}

fn bench(args: BenchArgs, file: &FileConfig) -> Result<()> {
    let seed = require_seed(args.seed, file)?;
    let gen_cfg = build_gen_config(&args.gen, file, seed)?;
    let ids: Vec<AlgorithmId> = match &args.algos {
        Some(list) => list
            .split(',')
            .map(|s| AlgorithmId::from_str(s.trim()).map_err(|e| config_err(e.to_string())))
            .collect::<Result<_>>()?,
        None => obayes::learner::benchmark_ids()
            .into_iter()
            .filter(|id| !matches!(id, AlgorithmId::Vb { .. }))
            .collect(),
    };
    let mut algo_args = args.algo_cfg.clone();
    if algo_args.algo.is_none() {
        algo_args.algo = Some("adf".into()); // only the shared knobs matter here
    }
    let (_, base_cfg) = build_algo(&algo_args, file, seed)?;
    let mut rows = Vec::new();
    println!(
        "{:<22} {:>12} {:>10} {:>14} {:>10}",
        "algorithm", "examples", "seconds", "examples/sec", "r_T"
    );
    for id in ids {
        let mut learner = build_learner(id, &base_cfg);
        let mut source = StreamGenerator::new(gen_cfg.clone())?;
        let start = Instant::now();
        let series = run_stream(learner.as_mut(), &mut source, &Schedule::default())?;
        let secs = start.elapsed().as_secs_f64();
        let rate = series.final_t as f64 / secs;
        println!(
            "{:<22} {:>12} {:>10.3} {:>14.0} {:>10.4}",
            id.to_string(),
            series.final_t,
            secs,
            rate,
            series.regret_coefficient()
        );
        rows.push((
            id.to_string(),
            series.final_t,
            secs,
            rate,
            series.regret_coefficient(),
        ));
    }
    if let Some(out) = args.out {
        let out = resolve_out(&out);
        let mut w = BufWriter::new(File::create(&out).context("creating output file")?);
        writeln!(w, "algorithm,examples,seconds,examples_per_sec,r_T")?;
        for (name, t, secs, rate, rt) in rows {
            writeln!(w, "{name},{t},{secs},{rate},{rt}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn parse_grid_spec(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(config_err(format!(
            "bad grid spec {s:?}, expected lo,hi,steps"
        )));
    }
    Ok((
        parts[0]
            .trim()
            .parse()
            .map_err(|_| config_err("bad grid lo"))?,
        parts[1]
            .trim()
            .parse()
            .map_err(|_| config_err("bad grid hi"))?,
        parts[2]
            .trim()
            .parse()
            .map_err(|_| config_err("bad grid steps"))?,
    ))
}

fn oracle(args: OracleArgs) -> Result<()> {
    let kinds: Vec<ShrinkKind> = match args.kind.as_str() {
        "logistic" => vec![ShrinkKind::Logistic],
        "probit" => vec![ShrinkKind::Probit],
        "both" => vec![ShrinkKind::Logistic, ShrinkKind::Probit],
        other => return Err(config_err(format!("unknown kind {other:?}"))),
    };
    let (mu_lo, mu_hi, mu_steps) = parse_grid_spec(&args.mean_grid)?;
    let (var_lo, var_hi, var_steps) = parse_grid_spec(&args.var_grid)?;
    if mu_steps < 2 || var_steps < 2 {
        return Err(config_err("grids need at least 2 steps"));
    }
    if var_lo < 0.0 {
        return Err(config_err("variance grid must be nonnegative"));
    }
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(resolve_out(path)).context("creating output file")?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(sink, "kind,mu,sigma_sq,closed_form,quadrature,abs_err")?;
    let mut worst: (f64, String) = (0.0, String::new());
    for kind in kinds {
        let name = match kind {
            ShrinkKind::Logistic => "logistic",
            ShrinkKind::Probit => "probit",
        };
        for i in 0..mu_steps {
            let mu = mu_lo + (mu_hi - mu_lo) * i as f64 / (mu_steps - 1) as f64;
            for j in 0..var_steps {
                let var = var_lo + (var_hi - var_lo) * j as f64 / (var_steps - 1) as f64;
                let closed = shrunk_prediction(Label::Pos, mu, var, kind)?.value();
                let quad = quadrature_mixture(Label::Pos, mu, var, kind);
                let err = (closed - quad).abs();
                writeln!(sink, "{name},{mu},{var},{closed},{quad},{err}")?;
                if err > worst.0 {
                    worst = (err, format!("{name} mu={mu} sigma_sq={var}"));
                }
            }
        }
    }
    sink.flush()?;
    eprintln!("worst |closed - quadrature| = {} at {}", worst.0, worst.1);
    Ok(())
}
