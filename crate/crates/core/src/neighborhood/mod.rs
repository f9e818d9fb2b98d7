//! The five improvement operators and the local-search loop ("BOA") that
//! applies them in fixed cycles.
//!
//! Operators evaluate moves incrementally from edge differences and return
//! the best strictly improving move for the route (or route pair) they are
//! given. Inter-route operators only return capacity-feasible moves, so a
//! feasible solution stays feasible under any returned move.

mod boa;
mod operators;

pub use boa::{boa_improve, Boa, BoaError, BoaResult, CycleBudget, MoveEvent};
pub use operators::Neighborhood;

use crate::cvrp::{DistanceMatrix, Route, Solution};
use serde::Serialize;

/// A move must lower the objective by more than this to count as an
/// improvement. It only absorbs floating-point noise on zero-gain moves.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Operator {
    TwoOpt,
    RelocateIntra,
    Cross,
    SymmetricExchange,
    RelocateInter,
}

impl Operator {
    /// Application order within one cycle.
    pub const CYCLE: [Operator; 5] = [
        Operator::TwoOpt,
        Operator::RelocateIntra,
        Operator::Cross,
        Operator::SymmetricExchange,
        Operator::RelocateInter,
    ];

    pub fn is_intra_route(self) -> bool {
        matches!(self, Operator::TwoOpt | Operator::RelocateIntra)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MoveKind {
    /// Reverse positions `i..=j` of `route`.
    TwoOpt { route: usize, i: usize, j: usize },
    /// Remove the customer at `from` and reinsert it so it ends up at index `to`.
    RelocateIntra { route: usize, from: usize, to: usize },
    /// `first` becomes `first[..cut_first] ++ second[cut_second..]` and
    /// `second` becomes `second[..cut_second] ++ first[cut_first..]`.
    Cross { first: usize, second: usize, cut_first: usize, cut_second: usize },
    /// Swap `first[pos_first]` with `second[pos_second]`.
    SymmetricExchange { first: usize, second: usize, pos_first: usize, pos_second: usize },
    /// Move `from_route[from_pos]` into `to_route` before index `to_pos`.
    RelocateInter { from_route: usize, from_pos: usize, to_route: usize, to_pos: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Move {
    pub kind: MoveKind,
    /// Objective change; negative is an improvement.
    pub delta: f64,
}

impl Move {
    pub fn operator(&self) -> Operator {
        match self.kind {
            MoveKind::TwoOpt { .. } => Operator::TwoOpt,
            MoveKind::RelocateIntra { .. } => Operator::RelocateIntra,
            MoveKind::Cross { .. } => Operator::Cross,
            MoveKind::SymmetricExchange { .. } => Operator::SymmetricExchange,
            MoveKind::RelocateInter { .. } => Operator::RelocateInter,
        }
    }

    /// Applies the move in place. Routes left empty are removed.
    pub fn apply_to(&self, routes: &mut Vec<Route>) {
        match self.kind {
            MoveKind::TwoOpt { route, i, j } => routes[route].0[i..=j].reverse(),
            MoveKind::RelocateIntra { route, from, to } => {
                let r = &mut routes[route].0;
                let c = r.remove(from);
                r.insert(to, c);
            }
            MoveKind::Cross { first, second, cut_first, cut_second } => {
                let tail_first = routes[first].0.split_off(cut_first);
                let tail_second = routes[second].0.split_off(cut_second);
                routes[first].0.extend(tail_second);
                routes[second].0.extend(tail_first);
            }
            MoveKind::SymmetricExchange { first, second, pos_first, pos_second } => {
                let a = routes[first].0[pos_first];
                routes[first].0[pos_first] = routes[second].0[pos_second];
                routes[second].0[pos_second] = a;
            }
            MoveKind::RelocateInter { from_route, from_pos, to_route, to_pos } => {
                let c = routes[from_route].0.remove(from_pos);
                routes[to_route].0.insert(to_pos, c);
            }
        }
        if !self.operator().is_intra_route() {
            routes.retain(|r| !r.is_empty());
        }
    }

    /// Returns a new solution with the move applied; the source is untouched.
    pub fn apply(&self, solution: &Solution, matrix: &DistanceMatrix) -> Solution {
        let mut routes = solution.routes().to_vec();
        self.apply_to(&mut routes);
        Solution::from_checked(routes, matrix)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NeighborhoodError {
    #[error("route index {index} out of range for {routes} routes")]
    RouteIndex { index: usize, routes: usize },
    #[error("inter-route operator needs two distinct routes, got {0} twice")]
    SameRoute(usize),
}
