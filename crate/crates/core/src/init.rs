//! Initial solutions: random permutation with sequential packing, and the
//! destroy-and-repack perturbation applied to converged solutions.

use crate::cvrp::{DistanceMatrix, Instance, Route, Solution};
use crate::seed;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

/// Packs customers in the given order, opening a new route whenever the
/// next customer would overflow the current one.
pub fn pack_sequential(order: &[usize], demands: &[u32], capacity: u32) -> Vec<Route> {
    let mut routes = Vec::new();
    let mut current = Vec::new();
    let mut load = 0;
    for &c in order {
        let d = demands[c];
        if load + d > capacity && !current.is_empty() {
            routes.push(Route(std::mem::take(&mut current)));
            load = 0;
        }
        current.push(c);
        load += d;
    }
    if !current.is_empty() {
        routes.push(Route(current));
    }
    routes
}

/// Uniformly random customer order, packed sequentially.
pub fn random_solution(instance: &Instance, matrix: &DistanceMatrix, seed: u64) -> Solution {
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (1..=instance.len()).collect();
    order.shuffle(&mut rng);
    let routes = pack_sequential(&order, &instance.demands(), instance.capacity());
    Solution::from_checked(routes, matrix)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbMode {
    /// Pool the chosen routes' customers, shuffle and repack them.
    #[default]
    Pool,
    /// Shuffle each chosen route in place; route membership is unchanged.
    PerRoute,
}

/// Destroys `min(r, routes)` routes chosen uniformly at random and rebuilds
/// them. Unselected routes keep their order and come first; rebuilt routes
/// are appended.
pub fn perturb(
    instance: &Instance,
    matrix: &DistanceMatrix,
    solution: &Solution,
    r: usize,
    mode: PerturbMode,
    seed: u64,
) -> Solution {
    let mut rng = seed::rng(seed);
    let routes = solution.routes();
    let k = r.min(routes.len());
    let mut chosen = index::sample(&mut rng, routes.len(), k).into_vec();
    chosen.sort_unstable();

    let out = match mode {
        PerturbMode::Pool => {
            let mut pool = Vec::new();
            let mut kept = Vec::with_capacity(routes.len());
            for (i, route) in routes.iter().enumerate() {
                if chosen.binary_search(&i).is_ok() {
                    pool.extend_from_slice(route);
                } else {
                    kept.push(route.clone());
                }
            }
            pool.shuffle(&mut rng);
            kept.extend(pack_sequential(&pool, &instance.demands(), instance.capacity()));
            kept
        }
        PerturbMode::PerRoute => {
            let mut out = routes.to_vec();
            for &i in &chosen {
                out[i].0.shuffle(&mut rng);
            }
            out
        }
    };
    Solution::from_checked(out, matrix)
}
