//! `restartlab`: data generation, ranker training and restart experiments.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for invalid flags.

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use restartlab_core::cvrp::{exact_optimum, SolutionFile};
use restartlab_core::datagen::{self, DatasetSpec, Preset};
use restartlab_core::harness::{self, Arm, ExperimentSpec, SweepSpec};
use restartlab_core::init::PerturbMode;
use restartlab_core::io::write_atomic;
use restartlab_core::ranker::{self, ModelKind, RankerModel, RegressionSample, ScorerConfig};
use restartlab_core::strategies::{run_strategy, RankingMode, StrategyConfig, StrategyKind};
use restartlab_core::{CycleBudget, Instance, Parallelism};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "restartlab", version, about = "CVRP local search with learned restart screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample instances and write them as JSON lines.
    GenInstances(GenInstances),
    /// Generate labelled solution pairs and a manifest.
    GenData(GenData),
    /// Train a pairwise ranker (or the regression baseline).
    TrainRanker(TrainRanker),
    /// Print accuracy and AUC of a model on a dataset.
    EvalRanker(EvalRanker),
    /// Train and evaluate one model per cycle budget.
    SweepComplexity(SweepComplexity),
    /// Run strategy arms over a shared instance stream.
    Experiment(Experiment),
    /// Solve one instance with a restart strategy.
    Solve(Solve),
    /// Solve a tiny instance exactly.
    Exact(Exact),
}

#[derive(Args)]
struct ProblemArgs {
    /// Customers per instance.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Vehicle capacity; defaults to 30, 40 or 50 for 20, 50 or 100 customers.
    #[arg(long, value_parser = clap::value_parser!(u32).range(9..))]
    capacity: Option<u32>,
}

impl ProblemArgs {
    fn preset(&self) -> Result<Preset, Failure> {
        let customers = self.n as usize;
        match (self.capacity, Preset::standard(customers)) {
            (Some(capacity), _) => Ok(Preset { customers, capacity }),
            (None, Some(p)) => Ok(p),
            (None, None) => Err(Failure::Usage(format!("--capacity is required for --n {customers}"))),
        }
    }
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, env = "RESTARTLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl Common {
    fn par(&self) -> Parallelism {
        Parallelism::from_jobs(self.jobs)
    }
}

#[derive(Args)]
struct GenInstances {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, env = "RESTARTLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenData {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Pairs to attempt; pairs inside the margin are dropped.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = datagen::DEFAULT_EPS)]
    eps: f64,
    /// Local-search cycle budget: a positive integer or `unbounded`.
    #[arg(long, default_value = "unbounded", value_parser = parse_cycles)]
    cycles: CycleBudget,
    /// First pair index; use a disjoint range for held-out data.
    #[arg(long, default_value_t = 0)]
    first_index: u64,
    /// Shorthand for `--first-index 2^40`.
    #[arg(long, conflicts_with = "first_index")]
    test: bool,
    #[command(flatten)]
    common: Common,
    /// Dataset file; the manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainRanker {
    #[arg(long)]
    data: PathBuf,
    /// JSON scorer configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Overrides the configuration's seed.
    #[arg(long, env = "RESTARTLAB_SEED")]
    seed: Option<u64>,
    /// Train the distance regressor instead of the pairwise ranker.
    #[arg(long)]
    regression: bool,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalRanker {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SweepComplexity {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Cycle budgets, as a list (`1,3,5`) or range (`1..5`).
    #[arg(long, default_value = "1..5", value_parser = parse_cycle_list)]
    cycles: CycleList,
    #[arg(long, default_value_t = 50_000, value_parser = clap::value_parser!(u64).range(1..))]
    train_pairs: u64,
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
    test_pairs: u64,
    #[arg(long, default_value_t = datagen::DEFAULT_EPS)]
    eps: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    common: Common,
    /// CSV output; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    SequentialRandom,
    SequentialPerturb,
    Population,
    PopulationBestOffspring,
    PopulationMixTopI,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::SequentialRandom => StrategyKind::SequentialRandom,
            StrategyArg::SequentialPerturb => StrategyKind::SequentialPerturb,
            StrategyArg::Population => StrategyKind::Population,
            StrategyArg::PopulationBestOffspring => StrategyKind::PopulationBestOffspring,
            StrategyArg::PopulationMixTopI => StrategyKind::PopulationMixTopI,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RankingArg {
    Learned,
    None,
    Oracle,
}

impl From<RankingArg> for RankingMode {
    fn from(r: RankingArg) -> Self {
        match r {
            RankingArg::Learned => RankingMode::Learned,
            RankingArg::None => RankingMode::None,
            RankingArg::Oracle => RankingMode::OracleByTrueScore,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PerturbArg {
    Pool,
    PerRoute,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value = "sequential-random")]
    strategy: StrategyArg,
    /// Local-search runs (T).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    iters: u64,
    /// Candidates or offspring per iteration (K, O).
    #[arg(long, visible_alias = "o", default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Population size (I).
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    i: u64,
    /// Routes destroyed per perturbation (R).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    r: u64,
    #[arg(long, default_value = "unbounded", value_parser = parse_cycles)]
    cycles: CycleBudget,
    #[arg(long, value_enum, default_value = "pool")]
    perturb: PerturbArg,
}

impl StrategyArgs {
    fn config(&self, ranking: RankingMode, seed: u64) -> StrategyConfig {
        StrategyConfig {
            strategy: self.strategy.into(),
            iterations: self.iters as usize,
            candidates: self.k as usize,
            population: self.i as usize,
            destroy: self.r as usize,
            cycles: self.cycles,
            ranking,
            perturb_mode: match self.perturb {
                PerturbArg::Pool => PerturbMode::Pool,
                PerturbArg::PerRoute => PerturbMode::PerRoute,
            },
            seed,
        }
    }
}

#[derive(Args)]
struct Experiment {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Comma-separated arms: baseline, learned, oracle.
    #[arg(long, value_delimiter = ',', default_value = "baseline,learned")]
    arms: Vec<ArmArg>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    instances: u64,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    /// Output directory for records.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArmArg {
    Baseline,
    Learned,
    Oracle,
}

impl ArmArg {
    fn name(self) -> &'static str {
        match self {
            ArmArg::Baseline => "baseline",
            ArmArg::Learned => "learned",
            ArmArg::Oracle => "oracle",
        }
    }

    fn ranking(self) -> RankingMode {
        match self {
            ArmArg::Baseline => RankingMode::None,
            ArmArg::Learned => RankingMode::Learned,
            ArmArg::Oracle => RankingMode::OracleByTrueScore,
        }
    }
}

#[derive(Args)]
struct Solve {
    #[arg(long)]
    instance_file: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long, value_enum, default_value = "none")]
    ranking: RankingArg,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, env = "RESTARTLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Solution JSON output; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Exact {
    #[arg(long)]
    instance_file: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct CycleList(Vec<u32>);

fn parse_cycles(s: &str) -> Result<CycleBudget, String> {
    if s == "unbounded" {
        return Ok(CycleBudget::Unbounded);
    }
    match s.parse::<u32>() {
        Ok(m) if m >= 1 => Ok(CycleBudget::Limited(m)),
        _ => Err(format!("expected a positive integer or `unbounded`, got `{s}`")),
    }
}

fn parse_cycle_list(s: &str) -> Result<CycleList, String> {
    let positive = |t: &str| match t.trim().parse::<u32>() {
        Ok(m) if m >= 1 => Ok(m),
        _ => Err(format!("expected a positive integer, got `{t}`")),
    };
    let list = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (positive(a)?, positive(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(positive).collect::<Result<Vec<_>, _>>()?
    };
    Ok(CycleList(list))
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("\n{}", usage());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", usage());
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Usage of the subcommand named on the command line, or of the program.
fn usage() -> clap::builder::StyledStr {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args().nth(1).unwrap_or_default();
    match cmd.find_subcommand_mut(&name) {
        Some(sub) => sub.render_usage(),
        None => cmd.render_usage(),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenInstances(a) => gen_instances(a),
        Command::GenData(a) => gen_data(a),
        Command::TrainRanker(a) => train_ranker(a),
        Command::EvalRanker(a) => eval_ranker(a),
        Command::SweepComplexity(a) => sweep(a),
        Command::Experiment(a) => experiment(a),
        Command::Solve(a) => solve(a),
        Command::Exact(a) => exact(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_instances(a: GenInstances) -> Result<(), Failure> {
    let preset = a.problem.preset()?;
    let mut text = String::new();
    for i in 0..a.count {
        let inst = datagen::sample_instance(preset.customers, preset.capacity, restartlab_core::seed::derive(a.seed, i))?;
        text.push_str(&inst.to_json());
        text.push('\n');
    }
    emit(Some(&a.out), &text)?;
    Ok(())
}

fn gen_data(a: GenData) -> Result<(), Failure> {
    if !(a.eps > 0.0) {
        return Err(Failure::Usage(format!("--eps must be positive, got {}", a.eps)));
    }
    let spec = DatasetSpec {
        preset: a.problem.preset()?,
        count: a.count,
        eps: a.eps,
        cycles: a.cycles,
        master_seed: a.common.seed,
        first_index: if a.test { datagen::TEST_FIRST_INDEX } else { a.first_index },
    };
    let ds = datagen::build_dataset(&spec, a.common.par())?;
    datagen::write_dataset(&a.out, &ds).with_context(|| format!("writing {}", a.out.display()))?;
    let m = &ds.manifest;
    eprintln!(
        "stored {} of {} pairs (discard rate {:.4}), hash {}",
        m.stored, m.attempted, m.discard_rate, m.content_hash
    );
    Ok(())
}

fn load_config(path: Option<&Path>, epochs: Option<usize>, seed: Option<u64>) -> Result<ScorerConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => ScorerConfig::default(),
    };
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn train_ranker(a: TrainRanker) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref(), a.epochs, a.seed)?;
    let par = Parallelism::from_jobs(a.jobs);
    let ds = datagen::read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let samples = ranker::featurize_pairs(&ds.pairs, par);
    let (model, kind) = if a.regression {
        let reg: Vec<RegressionSample> = ds
            .pairs
            .iter()
            .zip(samples)
            .flat_map(|(p, s)| {
                [
                    RegressionSample { features: s.a, target: p.final_a },
                    RegressionSample { features: s.b, target: p.final_b },
                ]
            })
            .collect();
        let out = ranker::train_regression(&reg, &cfg, par)?;
        for (e, l) in out.epoch_losses.iter().enumerate() {
            eprintln!("epoch {e}: loss {l:.6}");
        }
        (out.model, ModelKind::Regression)
    } else {
        let out = ranker::train_model(RankerModel::new(cfg), &samples, par, |e, l, _| {
            eprintln!("epoch {e}: loss {l:.6}");
        })?;
        (out.model, ModelKind::Siamese)
    };
    ranker::save_model(&a.out, &model, kind)?;
    Ok(())
}

fn eval_ranker(a: EvalRanker) -> Result<(), Failure> {
    let par = Parallelism::from_jobs(a.jobs);
    let (model, kind) = ranker::load_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let ds = datagen::read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let samples = ranker::featurize_pairs(&ds.pairs, par);
    let ev = match kind {
        ModelKind::Siamese => ranker::evaluate(&model, &samples, par),
        ModelKind::Regression => ranker::evaluate_regression(&model, &samples, par),
    };
    println!("accuracy {:.6}", ev.accuracy);
    println!("auc {:.6}", ev.auc);
    println!("pairs {}", ev.pairs);
    Ok(())
}

fn sweep(a: SweepComplexity) -> Result<(), Failure> {
    if !(a.eps > 0.0) {
        return Err(Failure::Usage(format!("--eps must be positive, got {}", a.eps)));
    }
    let spec = SweepSpec {
        preset: a.problem.preset()?,
        cycles: a.cycles.0,
        train_pairs: a.train_pairs,
        test_pairs: a.test_pairs,
        eps: a.eps,
        master_seed: a.common.seed,
        scorer: load_config(a.config.as_deref(), a.epochs, None)?,
    };
    let rows = harness::sweep_complexity(&spec, a.common.par(), |r| {
        eprintln!("M={}: accuracy {:.4}, AUC {:.4}", r.cycles, r.accuracy, r.auc);
    })?;
    emit(a.out.as_deref(), &harness::to_csv(harness::SWEEP_SCHEMA, &rows)?)?;
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(inst)
}

fn load_siamese(path: Option<&Path>, needed: bool) -> Result<Option<RankerModel>, Failure> {
    match (path, needed) {
        (None, true) => Err(Failure::Usage("learned ranking requires --model".into())),
        (_, false) => Ok(None),
        (Some(p), true) => {
            let (model, kind) = ranker::load_model(p).with_context(|| format!("reading {}", p.display()))?;
            if kind != ModelKind::Siamese {
                return Err(Failure::Usage(format!("{} is not a pairwise ranker", p.display())));
            }
            Ok(Some(model))
        }
    }
}

fn experiment(a: Experiment) -> Result<(), Failure> {
    let mut arms = Vec::new();
    for arm in &a.arms {
        if arms.iter().any(|x: &Arm| x.name == arm.name()) {
            return Err(Failure::Usage(format!("arm {} given twice", arm.name())));
        }
        arms.push(Arm { name: arm.name().into(), config: a.strategy.config(arm.ranking(), 0) });
    }
    let needs_model = a.arms.contains(&ArmArg::Learned);
    let model = load_siamese(a.model.as_deref(), needs_model)?;
    arms.iter().try_for_each(|arm| arm.config.validate()).map_err(|e| Failure::Usage(e.to_string()))?;
    let spec = ExperimentSpec {
        preset: a.problem.preset()?,
        instances: a.instances as usize,
        master_seed: a.common.seed,
        arms,
    };
    let res = harness::run_experiment(&spec, model.as_ref(), a.common.par())?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    harness::write_csv(&a.out.join("records.csv"), harness::RECORDS_SCHEMA, &res.rows)?;
    harness::write_csv(&a.out.join("summary.csv"), harness::SUMMARY_SCHEMA, &res.summary)?;
    for s in &res.summary {
        eprintln!(
            "{} t={}: mean {:.6}, mean best {:.6}",
            s.arm, s.iteration, s.mean_distance, s.mean_best_distance
        );
    }
    Ok(())
}

fn solve(a: Solve) -> Result<(), Failure> {
    let ranking: RankingMode = a.ranking.into();
    let model = load_siamese(a.model.as_deref(), ranking == RankingMode::Learned)?;
    let config = a.strategy.config(ranking, a.seed);
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let instance = read_instance(&a.instance_file)?;
    let run = run_strategy(&instance, model.as_ref(), &config)?;
    let mut text = serde_json::to_string_pretty(&SolutionFile::from(&run.best))?;
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    Ok(())
}

fn exact(a: Exact) -> Result<(), Failure> {
    let instance = read_instance(&a.instance_file)?;
    let opt = exact_optimum(&instance)?;
    let mut text = serde_json::to_string_pretty(&SolutionFile::from(&opt.solution))?;
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    Ok(())
}

