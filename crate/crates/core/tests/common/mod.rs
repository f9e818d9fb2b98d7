//! Helpers shared by the integration tests: seeded instance generation and
//! a brute-force CVRP solver written without any of the crate's solver code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restartlab_core::cvrp::Customer;
use restartlab_core::{Instance, Point};

/// Random instance with `n` customers; capacity drawn so that both single-
/// and multi-route optima occur.
pub fn random_instance(seed: u64, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depot = Point::new(rng.random(), rng.random());
    let customers: Vec<Customer> = (0..n)
        .map(|_| Customer { x: rng.random(), y: rng.random(), demand: rng.random_range(1..=9) })
        .collect();
    let total: u32 = customers.iter().map(|c| c.demand).sum();
    let capacity = rng.random_range(9..=total.max(9));
    Instance::new(depot, customers, capacity, seed).unwrap()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn coords(inst: &Instance) -> Vec<(f64, f64)> {
    let d = inst.depot();
    std::iter::once((d.x, d.y)).chain(inst.customers().iter().map(|c| (c.x, c.y))).collect()
}

/// Length of depot -> route -> depot.
pub fn tour_length(inst: &Instance, route: &[usize]) -> f64 {
    let xy = coords(inst);
    let mut prev = 0;
    let mut total = 0.0;
    for &c in route {
        total += dist(xy[prev], xy[c]);
        prev = c;
    }
    total + dist(xy[prev], xy[0])
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Cheapest visiting order of `block`, oriented so the first customer is
/// smaller than the last.
fn best_order(inst: &Instance, block: &[usize]) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(block) {
        if p.len() > 1 && p[0] > p[p.len() - 1] {
            continue;
        }
        let c = tour_length(inst, &p);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, p));
        }
    }
    best.unwrap()
}

/// Optimal distance and routes (each oriented, list sorted) by enumerating
/// every set partition of the customers and every order within each block.
pub fn brute_force(inst: &Instance) -> (f64, Vec<Vec<usize>>) {
    let n = inst.len();
    let demand: Vec<u32> = std::iter::once(0).chain(inst.customers().iter().map(|c| c.demand)).collect();
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    // Restricted growth strings label customer i with block a[i].
    let mut labels = vec![0usize; n];
    loop {
        let blocks = labels.iter().max().unwrap() + 1;
        let mut members = vec![Vec::new(); blocks];
        for (i, &b) in labels.iter().enumerate() {
            members[b].push(i + 1);
        }
        let feasible = members.iter().all(|m| m.iter().map(|&c| demand[c]).sum::<u32>() <= inst.capacity());
        if feasible {
            let mut total = 0.0;
            let mut routes = Vec::new();
            for m in &members {
                let (c, r) = best_order(inst, m);
                total += c;
                routes.push(r);
            }
            routes.sort();
            let better = match &best {
                None => true,
                Some((b, br)) => total < b - 1e-12 || ((total - b).abs() <= 1e-12 && routes < *br),
            };
            if better {
                best = Some((total, routes));
            }
        }
        // Next restricted growth string.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return best.unwrap();
            }
            let max_prefix = labels[..i].iter().max().copied().unwrap();
            if labels[i] <= max_prefix {
                labels[i] += 1;
                for l in &mut labels[i + 1..] {
                    *l = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

use restartlab_core::harness::{to_csv, RecordRow, RECORDS_SCHEMA};
use restartlab_core::init::{perturb, random_solution};
use restartlab_core::neighborhood::Boa;
use restartlab_core::seed;
use restartlab_core::strategies::{iteration_seed, StrategyConfig, StrategyKind};

/// Records of plain repeated local search on the strategy's seed stream:
/// iteration `t` improves a random solution (or, when `perturbing`, a
/// perturbation of the previous result) built from candidate seed 0.
pub fn plain_restarts(inst: &Instance, config: &StrategyConfig, perturbing: bool) -> Vec<RecordRow> {
    let m = inst.distance_matrix();
    let boa = Boa::new(inst, &m);
    let mut best = f64::INFINITY;
    let mut prev = None;
    let mut rows = Vec::new();
    for t in 1..=config.iterations {
        let s = seed::derive(iteration_seed(config, t), 0);
        let start = match (&prev, perturbing) {
            (Some(p), true) => perturb(inst, &m, p, config.destroy, config.perturb_mode, s),
            _ => random_solution(inst, &m, s),
        };
        let out = boa.improve(&start, config.cycles).unwrap().solution;
        best = best.min(out.distance());
        rows.push(RecordRow {
            arm: "plain".into(),
            instance_id: 0,
            iteration: t,
            distance: out.distance(),
            best_distance: best,
            seed: iteration_seed(config, t),
        });
        prev = Some(out);
    }
    rows
}

/// CSV bytes of a strategy's records, labelled like [`plain_restarts`].
pub fn records_csv(records: &[restartlab_core::strategies::RunRecord]) -> String {
    let rows: Vec<RecordRow> = records
        .iter()
        .map(|r| RecordRow {
            arm: "plain".into(),
            instance_id: 0,
            iteration: r.iteration,
            distance: r.distance,
            best_distance: r.best_distance,
            seed: r.seed,
        })
        .collect();
    to_csv(RECORDS_SCHEMA, &rows).unwrap()
}

/// Strategies that reduce to plain restarts with one candidate and one
/// individual, and whether that reduction perturbs the previous result.
pub const REDUCIBLE: [(StrategyKind, bool); 4] = [
    (StrategyKind::SequentialRandom, false),
    (StrategyKind::SequentialPerturb, true),
    (StrategyKind::Population, true),
    (StrategyKind::PopulationBestOffspring, true),
];
