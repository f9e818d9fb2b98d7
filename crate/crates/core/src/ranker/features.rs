//! Solution featurisation for the scorer.

use crate::cvrp::{DistanceMatrix, Instance, Solution};

/// Per-customer inputs: x, y, demand / 9, distance from the previous node,
/// distance to the next node (the depot closes both ends of a route).
pub const NODE_FEATURES: usize = 5;
/// Per-solution inputs: sum and population standard deviation of route lengths.
pub const SOLUTION_FEATURES: usize = 2;

/// Demands are drawn from 1..=9, so this maps them into (0, 1].
pub const DEMAND_SCALE: f64 = 9.0;

pub type NodeFeatureVector = [f64; NODE_FEATURES];
pub type SolutionFeatureVector = [f64; SOLUTION_FEATURES];

/// Features of one solution in a flat layout: node rows for all routes in
/// route order, with `route_lens` marking the boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFeatures {
    pub nodes: Vec<NodeFeatureVector>,
    pub route_lens: Vec<usize>,
    pub summary: SolutionFeatureVector,
}

impl SolutionFeatures {
    pub fn routes(&self) -> impl Iterator<Item = &[NodeFeatureVector]> + '_ {
        let mut start = 0;
        self.route_lens.iter().map(move |&len| {
            let r = &self.nodes[start..start + len];
            start += len;
            r
        })
    }

    pub fn route_count(&self) -> usize {
        self.route_lens.len()
    }
}

pub fn featurize(instance: &Instance, matrix: &DistanceMatrix, solution: &Solution) -> SolutionFeatures {
    let mut nodes = Vec::with_capacity(instance.len());
    let mut route_lens = Vec::with_capacity(solution.routes().len());
    let mut lengths = Vec::with_capacity(solution.routes().len());
    for route in solution.routes() {
        let len = route.len();
        for (k, &c) in route.iter().enumerate() {
            let prev = if k == 0 { 0 } else { route[k - 1] };
            let next = if k + 1 == len { 0 } else { route[k + 1] };
            let p = instance.node(c);
            nodes.push([
                p.x,
                p.y,
                instance.demand(c) as f64 / DEMAND_SCALE,
                matrix.get(prev, c),
                matrix.get(c, next),
            ]);
        }
        route_lens.push(len);
        lengths.push(matrix.route_length(route));
    }
    SolutionFeatures { nodes, route_lens, summary: route_length_stats(&lengths) }
}

/// Sum and population standard deviation.
pub fn route_length_stats(lengths: &[f64]) -> SolutionFeatureVector {
    if lengths.is_empty() {
        return [0.0, 0.0];
    }
    let sum: f64 = lengths.iter().sum();
    let mean = sum / lengths.len() as f64;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lengths.len() as f64;
    [sum, var.sqrt()]
}
