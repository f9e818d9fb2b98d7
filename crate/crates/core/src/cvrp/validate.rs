use super::{Instance, Solution};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// A route visits a node that is not a customer (the depot or an index beyond N).
    Degree,
    /// A route is empty or more routes than customers are used.
    DepotDegree,
    Capacity,
    Duplicate,
    Missing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    /// Final running load of each route.
    pub loads: Vec<u32>,
}

impl ValidationReport {
    pub fn has(&self, kind: ConstraintKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Checks a solution against every constraint of the CVRP formulation and
/// reports all violations found. The vehicle count is not fixed: any number
/// of non-empty routes up to N is accepted.
pub fn validate(instance: &Instance, solution: &Solution) -> ValidationReport {
    validate_routes(instance, solution.routes().iter().map(|r| r.customers()))
}

pub(crate) fn validate_routes<'a>(
    instance: &Instance,
    routes: impl IntoIterator<Item = &'a [usize]>,
) -> ValidationReport {
    let n = instance.len();
    let cap = instance.capacity();
    let mut violations = Vec::new();
    let mut loads = Vec::new();
    let mut seen = vec![0usize; n + 1];
    let mut count = 0;

    for (r, route) in routes.into_iter().enumerate() {
        count += 1;
        if route.is_empty() {
            violations.push(Violation {
                kind: ConstraintKind::DepotDegree,
                detail: format!("route {r} is empty"),
            });
        }
        // Running load: u_i for each visited customer must stay within C.
        let mut load = 0u32;
        let mut over = false;
        for &c in route {
            if c == 0 || c > n {
                violations.push(Violation {
                    kind: ConstraintKind::Degree,
                    detail: format!("route {r} visits node {c}, not a customer"),
                });
                continue;
            }
            seen[c] += 1;
            load += instance.demand(c);
            over |= load > cap;
        }
        if over {
            violations.push(Violation {
                kind: ConstraintKind::Capacity,
                detail: format!("route {r} load {load} exceeds capacity {cap}"),
            });
        }
        loads.push(load);
    }

    if count > n {
        violations.push(Violation {
            kind: ConstraintKind::DepotDegree,
            detail: format!("{count} routes for {n} customers"),
        });
    }
    for (c, &times) in seen.iter().enumerate().skip(1) {
        match times {
            0 => violations.push(Violation {
                kind: ConstraintKind::Missing,
                detail: format!("customer {c} is not served"),
            }),
            1 => {}
            k => violations.push(Violation {
                kind: ConstraintKind::Duplicate,
                detail: format!("customer {c} is served {k} times"),
            }),
        }
    }

    ValidationReport { feasible: violations.is_empty(), violations, loads }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvrp::fixtures::instance;
    use crate::cvrp::Solution;

    fn four() -> Instance {
        instance((0.5, 0.5), &[(0.1, 0.1, 5), (0.2, 0.9, 5), (0.8, 0.8, 6), (0.9, 0.1, 4)], 10)
    }

    #[test]
    fn feasible_partition() {
        let inst = four();
        let m = inst.distance_matrix();
        let s = Solution::from_vecs(vec![vec![1, 2], vec![3, 4]], &m).unwrap();
        let rep = validate(&inst, &s);
        assert!(rep.feasible);
        assert!(rep.violations.is_empty());
        assert_eq!(rep.loads, vec![10, 10]);
    }

    #[test]
    fn capacity_plus_one() {
        let inst = four();
        let m = inst.distance_matrix();
        let s = Solution::from_vecs(vec![vec![1, 3], vec![2, 4]], &m).unwrap();
        let rep = validate(&inst, &s);
        assert!(!rep.feasible);
        assert_eq!(rep.violations.len(), 1);
        assert!(rep.has(ConstraintKind::Capacity));
        assert_eq!(rep.loads[0], 11);
    }

    #[test]
    fn duplicate_customer() {
        let inst = four();
        let m = inst.distance_matrix();
        let s = Solution::from_vecs(vec![vec![1, 3], vec![3, 4], vec![2]], &m).unwrap();
        let rep = validate(&inst, &s);
        assert!(rep.has(ConstraintKind::Duplicate));
        assert!(!rep.has(ConstraintKind::Missing));
        assert!(!rep.feasible);

        let s = Solution::from_vecs(vec![vec![1, 3], vec![3, 4]], &m).unwrap();
        let rep = validate(&inst, &s);
        assert!(rep.has(ConstraintKind::Duplicate));
        assert!(rep.has(ConstraintKind::Missing));
    }

    #[test]
    fn structural_violations() {
        let inst = four();
        let rep = validate_routes(&inst, [&[1usize, 2][..], &[][..], &[0, 3, 4][..]]);
        assert!(rep.has(ConstraintKind::DepotDegree));
        assert!(rep.has(ConstraintKind::Degree));
        let rep = validate_routes(&inst, [&[1usize][..], &[2][..], &[3][..], &[4][..], &[9][..]]);
        assert!(rep.has(ConstraintKind::DepotDegree));
        assert!(rep.has(ConstraintKind::Degree));
    }
}
