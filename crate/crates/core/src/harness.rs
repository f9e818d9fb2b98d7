//! Experiment orchestration: runs strategy arms over a shared stream of
//! instances, aggregates per-iteration means and writes versioned CSVs.

use crate::datagen::{build_dataset, sample_instance, DatagenError, DatasetSpec, Preset, TEST_FIRST_INDEX};
use crate::io::write_atomic;
use crate::neighborhood::CycleBudget;
use crate::par::{map_indexed, Parallelism};
use crate::ranker::{evaluate, featurize_pairs, train, RankerModel, ScorerConfig, TrainError};
use crate::seed;
use crate::strategies::{run_strategy, RankingMode, RunRecord, StrategyConfig, StrategyError};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const RECORDS_SCHEMA: &str = "#schema=restartlab.records.v1";
pub const SUMMARY_SCHEMA: &str = "#schema=restartlab.summary.v1";
pub const SWEEP_SCHEMA: &str = "#schema=restartlab.sweep.v1";

/// Tag separating experiment instance seeds from dataset seeds.
const EXPERIMENT_STREAM: u64 = 0x6578_7065_7269_6d65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    /// `seed` is ignored; each arm's seeds derive from its configuration.
    pub config: StrategyConfig,
}

impl Arm {
    /// Seed of this arm's candidate generation. Depends on the
    /// configuration apart from the ranking mode, so arms that differ only
    /// in how they screen candidates screen the same candidates.
    pub fn seed(&self, master: u64) -> u64 {
        let cfg = StrategyConfig { seed: 0, ranking: RankingMode::None, ..self.config };
        let json = serde_json::to_vec(&cfg).expect("config serialises");
        seed::derive(master, seed::fnv1a(&json))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub instances: usize,
    pub master_seed: u64,
    pub arms: Vec<Arm>,
}

impl ExperimentSpec {
    pub fn instance(&self, index: usize) -> Result<crate::Instance, DatagenError> {
        let s = seed::derive_path(self.master_seed, &[EXPERIMENT_STREAM, index as u64]);
        sample_instance(self.preset.customers, self.preset.capacity, s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("arm {arm}: {source}")]
    Strategy { arm: String, source: StrategyError },
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("duplicate arm name {0}")]
    DuplicateArm(String),
    #[error("no arms given")]
    NoArms,
    #[error("instance count must be at least 1")]
    NoInstances,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One row of the long-form CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub arm: String,
    pub instance_id: usize,
    pub iteration: usize,
    pub distance: f64,
    pub best_distance: f64,
    pub seed: u64,
}

/// One row of the summary CSV: means over instances at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub arm: String,
    pub iteration: usize,
    pub mean_distance: f64,
    pub mean_best_distance: f64,
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    /// Ordered by arm, instance, iteration.
    pub rows: Vec<RecordRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    /// Distances of `arm` at `iteration`, indexed by instance.
    pub fn distances(&self, arm: &str, iteration: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.arm == arm && r.iteration == iteration).map(|r| r.distance).collect()
    }
}

/// Runs every arm on every instance. `model` serves all learned arms.
pub fn run_experiment(
    spec: &ExperimentSpec,
    model: Option<&RankerModel>,
    par: Parallelism,
) -> Result<ExperimentResult, HarnessError> {
    if spec.arms.is_empty() {
        return Err(HarnessError::NoArms);
    }
    if spec.instances == 0 {
        return Err(HarnessError::NoInstances);
    }
    for (i, arm) in spec.arms.iter().enumerate() {
        if spec.arms[..i].iter().any(|a| a.name == arm.name) {
            return Err(HarnessError::DuplicateArm(arm.name.clone()));
        }
        arm.config.validate().map_err(|source| HarnessError::Strategy { arm: arm.name.clone(), source })?;
        if arm.config.ranking == RankingMode::Learned && model.is_none() {
            return Err(HarnessError::Strategy { arm: arm.name.clone(), source: StrategyError::MissingModel });
        }
    }
    let instances = map_indexed(spec.instances, par, |i| spec.instance(i))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let arm_seeds: Vec<u64> = spec.arms.iter().map(|a| a.seed(spec.master_seed)).collect();
    let jobs = spec.arms.len() * spec.instances;
    let runs = map_indexed(jobs, par, |job| {
        let (a, i) = (job / spec.instances, job % spec.instances);
        let arm = &spec.arms[a];
        let config = StrategyConfig { seed: seed::derive(arm_seeds[a], i as u64), ..arm.config };
        run_strategy(&instances[i], model, &config)
            .map(|run| run.records)
            .map_err(|source| HarnessError::Strategy { arm: arm.name.clone(), source })
    });
    let mut rows = Vec::new();
    for (job, records) in runs.into_iter().enumerate() {
        let (a, i) = (job / spec.instances, job % spec.instances);
        rows.extend(records?.into_iter().map(|r: RunRecord| RecordRow {
            arm: spec.arms[a].name.clone(),
            instance_id: i,
            iteration: r.iteration,
            distance: r.distance,
            best_distance: r.best_distance,
            seed: r.seed,
        }));
    }
    let summary = summarize(&rows);
    Ok(ExperimentResult { rows, summary })
}

/// Per (arm, iteration) means, arms in first-appearance order.
pub fn summarize(rows: &[RecordRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut sums: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        let pos = out.iter().position(|s| s.arm == r.arm && s.iteration == r.iteration);
        let k = pos.unwrap_or_else(|| {
            out.push(SummaryRow {
                arm: r.arm.clone(),
                iteration: r.iteration,
                mean_distance: 0.0,
                mean_best_distance: 0.0,
                instances: 0,
            });
            sums.push((0.0, 0.0));
            out.len() - 1
        });
        sums[k].0 += r.distance;
        sums[k].1 += r.best_distance;
        out[k].instances += 1;
    }
    for (s, (d, b)) in out.iter_mut().zip(sums) {
        s.mean_distance = d / s.instances as f64;
        s.mean_best_distance = b / s.instances as f64;
    }
    let arm_rank = |name: &str| out.iter().position(|s| s.arm == name).unwrap();
    let mut keyed: Vec<(usize, SummaryRow)> = out.iter().map(|s| (arm_rank(&s.arm), s.clone())).collect();
    keyed.sort_by_key(|(a, s)| (*a, s.iteration));
    keyed.into_iter().map(|(_, s)| s).collect()
}

/// CSV text with the schema line first, then a header row.
pub fn to_csv<T: Serialize>(schema: &str, rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8");
    Ok(format!("{schema}\n{body}"))
}

/// Parses CSV text written by [`to_csv`], checking the schema line.
pub fn from_csv<T: serde::de::DeserializeOwned>(schema: &str, text: &str) -> Result<Vec<T>, HarnessError> {
    let body = text
        .strip_prefix(schema)
        .and_then(|rest| rest.strip_prefix('\n'))
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("missing schema line {schema}")))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<(), HarnessError> {
    write_atomic(path, to_csv(schema, rows)?.as_bytes())?;
    Ok(())
}

/// One-sided exact sign test: probability of at least `wins` successes in
/// `wins + losses` fair coin flips. Ties are dropped by the caller.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if wins == 0 {
        return 1.0;
    }
    // Sum pmf(k) for k >= wins in log space, pmf(k) = C(n, k) / 2^n.
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut ln_c = ln_choose(n, wins);
    let mut total = 0.0;
    for k in wins..=n {
        total += (ln_c - ln2n).exp();
        ln_c += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
    }
    total.min(1.0)
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Wins and losses of `a` against `b` (lower is better); exact ties skipped.
pub fn paired_wins(a: &[f64], b: &[f64]) -> (usize, usize) {
    let wins = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x > y).count();
    (wins, losses)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub preset: Preset,
    pub cycles: Vec<u32>,
    pub train_pairs: u64,
    pub test_pairs: u64,
    pub eps: f64,
    pub master_seed: u64,
    pub scorer: ScorerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cycles: u32,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub accuracy: f64,
    pub auc: f64,
}

/// Regenerates train and test pairs for each cycle budget, trains a fresh
/// model and evaluates it on the held-out pairs.
pub fn sweep_complexity(
    spec: &SweepSpec,
    par: Parallelism,
    mut progress: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rows = Vec::with_capacity(spec.cycles.len());
    for &m in &spec.cycles {
        let train_spec = DatasetSpec {
            preset: spec.preset,
            count: spec.train_pairs,
            eps: spec.eps,
            cycles: CycleBudget::Limited(m),
            master_seed: spec.master_seed,
            first_index: 0,
        };
        let test_spec = DatasetSpec { count: spec.test_pairs, first_index: TEST_FIRST_INDEX, ..train_spec };
        let train_set = featurize_pairs(&build_dataset(&train_spec, par)?.pairs, par);
        let test_set = featurize_pairs(&build_dataset(&test_spec, par)?.pairs, par);
        let model = train(&train_set, &spec.scorer, par)?.model;
        let eval = evaluate(&model, &test_set, par);
        let row = SweepRow {
            cycles: m,
            train_pairs: train_set.len(),
            test_pairs: test_set.len(),
            accuracy: eval.accuracy,
            auc: eval.auc,
        };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}
