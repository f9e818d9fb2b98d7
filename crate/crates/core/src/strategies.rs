//! Restart strategies that combine candidate generation, screening and
//! local search.
//!
//! Seeds: iteration `t` (1-based) owns `derive(config.seed, t)`, and
//! candidate `o` of that iteration is built from `derive(iteration_seed, o)`.
//! Population strategies draw their initial population from the seeds of
//! iteration 1 and build the offspring that compete at iteration `t + 1`
//! from the seeds of iteration `t + 1`. With one individual and one
//! candidate every strategy therefore reduces to the same seed stream.

use crate::cvrp::{DistanceMatrix, Instance, Solution};
use crate::init::{perturb, random_solution, PerturbMode};
use crate::neighborhood::{Boa, BoaError, CycleBudget};
use crate::ranker::{featurize, rank_by_scores, RankerModel, SolutionFeatures};
use crate::seed;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    SequentialRandom,
    SequentialPerturb,
    Population,
    PopulationBestOffspring,
    PopulationMixTopI,
}

impl StrategyKind {
    pub fn is_population(self) -> bool {
        !matches!(self, StrategyKind::SequentialRandom | StrategyKind::SequentialPerturb)
    }
}

/// How candidates are ordered before one is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMode {
    /// Descending score of the trained model.
    Learned,
    /// Input order; only the first candidate is ever generated.
    None,
    /// Ascending distance after actually running local search on every
    /// candidate. Only meaningful as a reference in experiments.
    OracleByTrueScore,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: StrategyKind,
    /// Local-search runs (T).
    pub iterations: usize,
    /// Candidates or offspring generated per iteration (K, O).
    pub candidates: usize,
    /// Population size (I).
    pub population: usize,
    /// Routes destroyed by a perturbation (R).
    pub destroy: usize,
    pub cycles: CycleBudget,
    pub ranking: RankingMode,
    pub perturb_mode: PerturbMode,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::SequentialRandom,
            iterations: 5,
            candidates: 20,
            population: 20,
            destroy: 2,
            cycles: CycleBudget::Unbounded,
            ranking: RankingMode::Learned,
            perturb_mode: PerturbMode::Pool,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StrategyError {
    #[error("{0} must be at least {1}")]
    TooSmall(&'static str, usize),
    #[error("learned ranking needs a model")]
    MissingModel,
    #[error(transparent)]
    Boa(#[from] BoaError),
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let min_population = if self.strategy == StrategyKind::PopulationMixTopI { 2 } else { 1 };
        for (name, value, min) in [
            ("iterations", self.iterations, 1),
            ("candidates", self.candidates, 1),
            ("population", self.population, min_population),
            ("destroy", self.destroy, 1),
        ] {
            if value < min {
                return Err(StrategyError::TooSmall(name, min));
            }
        }
        Ok(())
    }
}

/// One local-search run of a strategy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    /// 1-based.
    pub iteration: usize,
    /// Distance reached by this iteration's local search.
    pub distance: f64,
    /// Best distance over iterations `1..=iteration`.
    pub best_distance: f64,
    /// Candidates the ranking looked at.
    pub candidates: usize,
    pub seed: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyRun {
    pub best: Solution,
    pub records: Vec<RunRecord>,
}

/// State after an iteration, for callers that inspect the search.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub iteration: usize,
    /// Current population; empty for sequential strategies.
    pub population: &'a [Solution],
    /// Solution local search started from.
    pub parent: &'a Solution,
    pub improved: &'a Solution,
    pub record: &'a RunRecord,
}

pub fn iteration_seed(config: &StrategyConfig, t: usize) -> u64 {
    seed::derive(config.seed, t as u64)
}

fn candidate_seed(config: &StrategyConfig, t: usize, o: usize) -> u64 {
    seed::derive(iteration_seed(config, t), o as u64)
}

struct Screen<'a> {
    mode: RankingMode,
    model: Option<&'a RankerModel>,
    instance: &'a Instance,
    matrix: &'a DistanceMatrix,
    boa: &'a Boa<'a>,
    cycles: CycleBudget,
}

impl Screen<'_> {
    /// Candidate indices, predicted best first.
    fn order(&self, candidates: &[Solution]) -> Result<Vec<usize>, StrategyError> {
        match self.mode {
            RankingMode::None => Ok((0..candidates.len()).collect()),
            RankingMode::Learned => {
                let model = self.model.ok_or(StrategyError::MissingModel)?;
                let feats: Vec<SolutionFeatures> =
                    candidates.iter().map(|c| featurize(self.instance, self.matrix, c)).collect();
                let refs: Vec<&SolutionFeatures> = feats.iter().collect();
                Ok(rank_by_scores(&model.score_batch(&refs)))
            }
            RankingMode::OracleByTrueScore => {
                let mut finals = Vec::with_capacity(candidates.len());
                for c in candidates {
                    finals.push(-self.boa.improve(c, self.cycles)?.solution.distance());
                }
                Ok(rank_by_scores(&finals))
            }
        }
    }

    fn best(&self, candidates: &[Solution]) -> Result<usize, StrategyError> {
        Ok(self.order(candidates)?[0])
    }
}

/// Runs `config` on `instance`. `model` is required for learned ranking.
pub fn run_strategy(
    instance: &Instance,
    model: Option<&RankerModel>,
    config: &StrategyConfig,
) -> Result<StrategyRun, StrategyError> {
    run_strategy_observed(instance, model, config, |_| {})
}

pub fn run_strategy_observed(
    instance: &Instance,
    model: Option<&RankerModel>,
    config: &StrategyConfig,
    observer: impl FnMut(&IterationView),
) -> Result<StrategyRun, StrategyError> {
    config.validate()?;
    if config.ranking == RankingMode::Learned && model.is_none() {
        return Err(StrategyError::MissingModel);
    }
    let matrix = instance.distance_matrix();
    let boa = Boa::new(instance, &matrix);
    let screen = Screen { mode: config.ranking, model, instance, matrix: &matrix, boa: &boa, cycles: config.cycles };
    let mut search = Search { config, instance, matrix: &matrix, screen, best: None, records: Vec::new() };
    match config.strategy {
        StrategyKind::SequentialRandom | StrategyKind::SequentialPerturb => search.sequential(observer)?,
        StrategyKind::Population | StrategyKind::PopulationMixTopI => search.population(observer)?,
        StrategyKind::PopulationBestOffspring => search.best_offspring(observer)?,
    }
    let best = search.best.expect("at least one iteration");
    Ok(StrategyRun { best, records: search.records })
}

struct Search<'a> {
    config: &'a StrategyConfig,
    instance: &'a Instance,
    matrix: &'a DistanceMatrix,
    screen: Screen<'a>,
    best: Option<Solution>,
    records: Vec<RunRecord>,
}

impl Search<'_> {
    /// Number of candidates actually generated: ranking nothing needs one.
    fn width(&self) -> usize {
        if self.config.ranking == RankingMode::None {
            1
        } else {
            self.config.candidates
        }
    }

    fn offspring(&self, parent: &Solution, t: usize, count: usize) -> Vec<Solution> {
        (0..count)
            .map(|o| {
                let s = candidate_seed(self.config, t, o);
                perturb(self.instance, self.matrix, parent, self.config.destroy, self.config.perturb_mode, s)
            })
            .collect()
    }

    fn randoms(&self, t: usize, count: usize) -> Vec<Solution> {
        (0..count).map(|o| random_solution(self.instance, self.matrix, candidate_seed(self.config, t, o))).collect()
    }

    /// Improves `parent` and books the result.
    fn improve(&mut self, t: usize, parent: &Solution, candidates: usize, started: Instant) -> Result<Solution, StrategyError> {
        let improved = self.screen.boa.improve(parent, self.config.cycles)?.solution;
        if self.best.as_ref().is_none_or(|b| improved.distance() < b.distance()) {
            self.best = Some(improved.clone());
        }
        self.records.push(RunRecord {
            iteration: t,
            distance: improved.distance(),
            best_distance: self.best.as_ref().map_or(f64::INFINITY, Solution::distance),
            candidates,
            seed: iteration_seed(self.config, t),
            elapsed: started.elapsed(),
        });
        Ok(improved)
    }

    fn sequential(&mut self, mut observer: impl FnMut(&IterationView)) -> Result<(), StrategyError> {
        let mut previous: Option<Solution> = None;
        for t in 1..=self.config.iterations {
            let started = Instant::now();
            let width = self.width();
            let candidates = match (&previous, self.config.strategy) {
                (Some(prev), StrategyKind::SequentialPerturb) => self.offspring(prev, t, width),
                _ => self.randoms(t, width),
            };
            let chosen = self.screen.best(&candidates)?;
            let improved = self.improve(t, &candidates[chosen], width, started)?;
            observer(&IterationView {
                iteration: t,
                population: &[],
                parent: &candidates[chosen],
                improved: &improved,
                record: self.records.last().unwrap(),
            });
            previous = Some(improved);
        }
        Ok(())
    }

    /// Pick the predicted best, improve it, add offspring, keep the `I`
    /// predicted best of the `I - 1 + O` pool.
    fn population(&mut self, mut observer: impl FnMut(&IterationView)) -> Result<(), StrategyError> {
        let size = self.config.population;
        let mut pop = self.randoms(1, size);
        for t in 1..=self.config.iterations {
            let started = Instant::now();
            let chosen = self.screen.best(&pop)?;
            let parent = pop.remove(chosen);
            let improved = self.improve(t, &parent, size, started)?;
            pop.extend(self.offspring(&improved, t + 1, self.width()));
            if pop.len() > size {
                let order = self.screen.order(&pop)?;
                let mut keep: Vec<Option<Solution>> = pop.into_iter().map(Some).collect();
                pop = order[..size].iter().map(|&i| keep[i].take().unwrap()).collect();
            }
            observer(&IterationView {
                iteration: t,
                population: &pop,
                parent: &parent,
                improved: &improved,
                record: self.records.last().unwrap(),
            });
        }
        Ok(())
    }

    /// Pick the predicted best, improve it, and replace it in place with
    /// the predicted best of its offspring.
    fn best_offspring(&mut self, mut observer: impl FnMut(&IterationView)) -> Result<(), StrategyError> {
        let size = self.config.population;
        let mut pop = self.randoms(1, size);
        for t in 1..=self.config.iterations {
            let started = Instant::now();
            let chosen = self.screen.best(&pop)?;
            let parent = pop[chosen].clone();
            let improved = self.improve(t, &parent, size, started)?;
            let mut kids = self.offspring(&improved, t + 1, self.width());
            let pick = self.screen.best(&kids)?;
            pop[chosen] = kids.swap_remove(pick);
            observer(&IterationView {
                iteration: t,
                population: &pop,
                parent: &parent,
                improved: &improved,
                record: self.records.last().unwrap(),
            });
        }
        Ok(())
    }
}
