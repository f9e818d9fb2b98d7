use super::{Move, Neighborhood, NeighborhoodError, Operator};
use crate::cvrp::{validate, DistanceMatrix, Instance, Route, Solution};
use serde::{Deserialize, Serialize};

/// Maximum number of operator cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleBudget {
    Limited(u32),
    Unbounded,
}

impl CycleBudget {
    fn allows(self, cycles: u32) -> bool {
        match self {
            CycleBudget::Limited(m) => cycles < m,
            CycleBudget::Unbounded => true,
        }
    }
}

impl std::fmt::Display for CycleBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CycleBudget::Limited(m) => write!(f, "{m}"),
            CycleBudget::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoaResult {
    pub solution: Solution,
    pub cycles: u32,
    /// A full cycle applied no move before the budget ran out.
    pub converged: bool,
    pub moves: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BoaError {
    #[error("initial solution is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Neighborhood(#[from] NeighborhoodError),
}

/// Emitted after every applied move.
#[derive(Clone, Copy, Debug)]
pub struct MoveEvent<'a> {
    pub cycle: u32,
    pub applied: &'a Move,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Local-search agent for one instance. Holds the operator context so
/// repeated runs on the same instance share the distance matrix.
pub struct Boa<'a> {
    instance: &'a Instance,
    neighborhood: Neighborhood<'a>,
}

impl<'a> Boa<'a> {
    pub fn new(instance: &'a Instance, matrix: &'a DistanceMatrix) -> Self {
        Self { instance, neighborhood: Neighborhood::new(instance, matrix) }
    }

    pub fn improve(&self, initial: &Solution, budget: CycleBudget) -> Result<BoaResult, BoaError> {
        self.improve_observed(initial, budget, |_| {})
    }

    /// Runs cycles of [`Operator::CYCLE`] until a cycle applies no move or
    /// the budget is spent. Each operator visits routes (or ordered route
    /// pairs for relocation, unordered pairs otherwise) in ascending index
    /// order and applies the best improving move at each before moving on.
    pub fn improve_observed(
        &self,
        initial: &Solution,
        budget: CycleBudget,
        mut observe: impl FnMut(&MoveEvent<'_>),
    ) -> Result<BoaResult, BoaError> {
        let report = validate(self.instance, initial);
        if !report.feasible {
            let detail = report.violations.iter().map(|v| v.detail.as_str()).collect::<Vec<_>>();
            return Err(BoaError::Infeasible(detail.join("; ")));
        }

        let nb = &self.neighborhood;
        let mut routes: Vec<Route> = initial.routes().to_vec();
        let mut objective = initial.distance();
        let mut cycles = 0;
        let mut moves = 0u64;
        let mut converged = false;

        let mut apply = |routes: &mut Vec<Route>, mv: Move, cycle: u32, objective: &mut f64| {
            let before = *objective;
            mv.apply_to(routes);
            *objective += mv.delta;
            #[cfg(debug_assertions)]
            {
                let full: f64 = routes.iter().map(|r| nb.matrix().route_length(r)).sum();
                debug_assert!(
                    (full - *objective).abs() < 1e-9,
                    "incremental objective {objective} drifted from {full} after {mv:?}"
                );
            }
            observe(&MoveEvent { cycle, applied: &mv, objective_before: before, objective_after: *objective });
        };

        while budget.allows(cycles) {
            cycles += 1;
            let moves_before = moves;
            for op in Operator::CYCLE {
                match op {
                    Operator::TwoOpt | Operator::RelocateIntra => {
                        let mut r = 0;
                        while r < routes.len() {
                            let found = if op == Operator::TwoOpt {
                                nb.two_opt(&routes, r)?
                            } else {
                                nb.relocate_intra(&routes, r)?
                            };
                            if let Some(mv) = found {
                                apply(&mut routes, mv, cycles, &mut objective);
                                moves += 1;
                            }
                            r += 1;
                        }
                    }
                    Operator::Cross | Operator::SymmetricExchange => {
                        let mut a = 0;
                        while a < routes.len() {
                            let mut b = a + 1;
                            while b < routes.len() {
                                let found = if op == Operator::Cross {
                                    nb.cross(&routes, a, b)?
                                } else {
                                    nb.symmetric_exchange(&routes, a, b)?
                                };
                                if let Some(mv) = found {
                                    apply(&mut routes, mv, cycles, &mut objective);
                                    moves += 1;
                                }
                                b += 1;
                            }
                            a += 1;
                        }
                    }
                    Operator::RelocateInter => {
                        let mut a = 0;
                        while a < routes.len() {
                            let mut b = 0;
                            while b < routes.len() && a < routes.len() {
                                if a != b {
                                    if let Some(mv) = nb.relocate_inter(&routes, a, b)? {
                                        apply(&mut routes, mv, cycles, &mut objective);
                                        moves += 1;
                                    }
                                }
                                b += 1;
                            }
                            a += 1;
                        }
                    }
                }
            }
            if moves == moves_before {
                converged = true;
                break;
            }
        }

        let solution = Solution::from_checked(routes, nb.matrix());
        Ok(BoaResult { solution, cycles, converged, moves })
    }
}

/// Convenience wrapper that builds the distance matrix for a single run.
pub fn boa_improve(
    instance: &Instance,
    initial: &Solution,
    budget: CycleBudget,
) -> Result<BoaResult, BoaError> {
    let matrix = instance.distance_matrix();
    Boa::new(instance, &matrix).improve(initial, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvrp::exact_optimum;
    use crate::cvrp::fixtures::instance;

    fn tiny() -> Instance {
        instance(
            (0.5, 0.5),
            &[(0.1, 0.2, 4), (0.8, 0.9, 3), (0.2, 0.8, 5), (0.9, 0.1, 2), (0.6, 0.3, 6)],
            10,
        )
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let inst = tiny();
        let opt = exact_optimum(&inst).unwrap();
        let res = boa_improve(&inst, &opt.solution, CycleBudget::Unbounded).unwrap();
        assert!(res.converged);
        assert_eq!(res.cycles, 1);
        assert_eq!(res.moves, 0);
        assert_eq!(res.solution, opt.solution);
    }

    #[test]
    fn zero_budget_returns_initial() {
        let inst = tiny();
        let m = inst.distance_matrix();
        let init = Solution::from_vecs(vec![vec![1, 2], vec![3, 4], vec![5]], &m).unwrap();
        let res = boa_improve(&inst, &init, CycleBudget::Limited(0)).unwrap();
        assert_eq!(res.cycles, 0);
        assert!(!res.converged);
        assert_eq!(res.moves, 0);
        assert_eq!(res.solution, init);
    }

    #[test]
    fn improves_monotonically_and_never_beats_optimum() {
        let inst = tiny();
        let m = inst.distance_matrix();
        let init = Solution::from_vecs(vec![vec![1, 2], vec![3, 4], vec![5]], &m).unwrap();
        let mut last = init.distance();
        let res = Boa::new(&inst, &m)
            .improve_observed(&init, CycleBudget::Unbounded, |ev| {
                assert!(ev.objective_after < ev.objective_before);
                assert!((ev.objective_before - last).abs() < 1e-12);
                last = ev.objective_after;
            })
            .unwrap();
        assert!(res.solution.distance() <= init.distance());
        assert!(res.moves > 0);
        assert!(validate(&inst, &res.solution).feasible);
        let opt = exact_optimum(&inst).unwrap();
        assert!(res.solution.distance() >= opt.distance - 1e-9);
    }

    #[test]
    fn rejects_infeasible_start() {
        let inst = tiny();
        let m = inst.distance_matrix();
        let bad = Solution::from_vecs(vec![vec![1, 2, 3]], &m).unwrap();
        assert!(matches!(
            boa_improve(&inst, &bad, CycleBudget::Unbounded),
            Err(BoaError::Infeasible(_))
        ));
    }

    #[test]
    fn result_serialises() {
        let inst = tiny();
        let opt = exact_optimum(&inst).unwrap();
        let res = boa_improve(&inst, &opt.solution, CycleBudget::Limited(3)).unwrap();
        let json = serde_json::to_value(&res).unwrap();
        assert_eq!(json["cycles"], 1);
        assert_eq!(json["converged"], true);
        assert!(json["solution"]["routes"].is_array());
    }
}
