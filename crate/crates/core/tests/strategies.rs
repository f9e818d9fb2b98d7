mod common;

use restartlab_core::datagen::sample_instance;
use restartlab_core::harness::{to_csv, RECORDS_SCHEMA};
use restartlab_core::init::random_solution;
use restartlab_core::ranker::{RankerModel, ScorerConfig};
use restartlab_core::seed;
use restartlab_core::strategies::*;
use restartlab_core::Solution;

fn base(strategy: StrategyKind, ranking: RankingMode) -> StrategyConfig {
    StrategyConfig { strategy, ranking, iterations: 6, candidates: 4, population: 5, seed: 17, ..Default::default() }
}

fn model() -> RankerModel {
    RankerModel::new(ScorerConfig::tiny())
}

#[test]
fn population_size_is_constant() {
    let inst = sample_instance(20, 30, 1).unwrap();
    let m = model();
    for kind in [StrategyKind::Population, StrategyKind::PopulationMixTopI, StrategyKind::PopulationBestOffspring] {
        for ranking in [RankingMode::None, RankingMode::Learned, RankingMode::OracleByTrueScore] {
            let cfg = base(kind, ranking);
            let mut sizes = Vec::new();
            run_strategy_observed(&inst, Some(&m), &cfg, |v| sizes.push(v.population.len())).unwrap();
            assert_eq!(sizes, vec![5; 6], "{kind:?} {ranking:?}");
        }
    }
}

#[test]
fn best_offspring_replaces_exactly_the_parent() {
    let inst = sample_instance(20, 30, 2).unwrap();
    let mat = inst.distance_matrix();
    let m = model();
    for ranking in [RankingMode::None, RankingMode::Learned, RankingMode::OracleByTrueScore] {
        let cfg = base(StrategyKind::PopulationBestOffspring, ranking);
        let mut prev: Vec<Solution> = (0..cfg.population)
            .map(|i| random_solution(&inst, &mat, seed::derive(iteration_seed(&cfg, 1), i as u64)))
            .collect();
        run_strategy_observed(&inst, Some(&m), &cfg, |v| {
            let changed: Vec<usize> = (0..prev.len()).filter(|&i| prev[i] != v.population[i]).collect();
            assert_eq!(changed.len(), 1, "iteration {}", v.iteration);
            assert_eq!(&prev[changed[0]], v.parent);
            prev = v.population.to_vec();
        })
        .unwrap();
    }
}

#[test]
fn baseline_equivalence() {
    for s in 0..5 {
        let inst = sample_instance(20, 30, 100 + s).unwrap();
        for (kind, perturbing) in common::REDUCIBLE {
            let cfg = StrategyConfig { candidates: 1, population: 1, seed: s, ..base(kind, RankingMode::None) };
            let run = run_strategy(&inst, None, &cfg).unwrap();
            let expected = to_csv(RECORDS_SCHEMA, &common::plain_restarts(&inst, &cfg, perturbing)).unwrap();
            assert_eq!(common::records_csv(&run.records), expected, "{kind:?}");
        }
    }
}

#[test]
fn one_candidate_ignores_the_model() {
    let inst = sample_instance(20, 30, 3).unwrap();
    let m = model();
    for kind in [StrategyKind::SequentialRandom, StrategyKind::SequentialPerturb] {
        let none = StrategyConfig { candidates: 1, ..base(kind, RankingMode::None) };
        let learned = StrategyConfig { ranking: RankingMode::Learned, ..none };
        let a = run_strategy(&inst, None, &none).unwrap();
        let b = run_strategy(&inst, Some(&m), &learned).unwrap();
        assert_eq!(common::records_csv(&a.records), common::records_csv(&b.records));
    }
}

#[test]
fn oracle_bounds_learned_on_shared_candidates() {
    let m = model();
    for s in 0..10 {
        let inst = sample_instance(20, 30, 200 + s).unwrap();
        let learned = StrategyConfig { seed: s, ..base(StrategyKind::SequentialRandom, RankingMode::Learned) };
        let oracle = StrategyConfig { ranking: RankingMode::OracleByTrueScore, ..learned };
        let a = run_strategy(&inst, Some(&m), &learned).unwrap();
        let b = run_strategy(&inst, None, &oracle).unwrap();
        for (l, o) in a.records.iter().zip(&b.records) {
            assert!(o.distance <= l.distance, "iteration {}", l.iteration);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let inst = sample_instance(20, 30, 4).unwrap();
    let m = model();
    for kind in [
        StrategyKind::SequentialRandom,
        StrategyKind::SequentialPerturb,
        StrategyKind::Population,
        StrategyKind::PopulationBestOffspring,
        StrategyKind::PopulationMixTopI,
    ] {
        let cfg = base(kind, RankingMode::Learned);
        let a = run_strategy(&inst, Some(&m), &cfg).unwrap();
        let b = run_strategy(&inst, Some(&m), &cfg).unwrap();
        assert_eq!(common::records_csv(&a.records), common::records_csv(&b.records));
        assert_eq!(a.best, b.best);
    }
}

#[test]
fn mix_keeps_parents_when_offspring_rank_last() {
    // With ranking by input order, the I - 1 surviving parents precede the
    // offspring in the pool, so only the first offspring survives.
    let inst = sample_instance(20, 30, 5).unwrap();
    let cfg = StrategyConfig { candidates: 3, ..base(StrategyKind::PopulationMixTopI, RankingMode::None) };
    let mat = inst.distance_matrix();
    let mut prev: Vec<Solution> = (0..cfg.population)
        .map(|i| random_solution(&inst, &mat, seed::derive(iteration_seed(&cfg, 1), i as u64)))
        .collect();
    run_strategy_observed(&inst, None, &cfg, |v| {
        assert_eq!(v.parent, &prev[0]);
        assert_eq!(&v.population[..cfg.population - 1], &prev[1..]);
        prev = v.population.to_vec();
    })
    .unwrap();
}
