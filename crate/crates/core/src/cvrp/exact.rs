//! Exact optimum for tiny instances by dynamic programming over customer
//! subsets: Held-Karp gives the shortest tour through every
//! capacity-feasible subset, then a set-partition DP combines tours.

use super::{CvrpError, DistanceMatrix, Instance, Route, Solution};

pub const EXACT_MAX_CUSTOMERS: usize = 8;

/// Costs closer than this are treated as tied and resolved by the
/// lexicographically smaller canonical route list.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactOptimum {
    pub distance: f64,
    pub solution: Solution,
}

/// Orients every route so it is lexicographically no greater than its
/// reversal and sorts the route list.
pub fn canonical_routes(routes: &[Route]) -> Vec<Route> {
    let mut out: Vec<Route> = routes
        .iter()
        .map(|r| {
            let rev: Vec<usize> = r.iter().rev().copied().collect();
            if rev.as_slice() < r.customers() {
                Route(rev)
            } else {
                r.clone()
            }
        })
        .collect();
    out.sort();
    out
}

pub fn exact_optimum(instance: &Instance) -> Result<ExactOptimum, CvrpError> {
    let n = instance.len();
    if n > EXACT_MAX_CUSTOMERS {
        return Err(CvrpError::TooLarge { customers: n, limit: EXACT_MAX_CUSTOMERS });
    }
    let matrix = instance.distance_matrix();
    let full = (1usize << n) - 1;

    let mut load = vec![0u32; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        load[mask] = load[mask & (mask - 1)] + instance.demand(low + 1);
    }

    let tours = shortest_tours(&matrix, n, &load, instance.capacity());

    let mut best: Vec<Option<(f64, Vec<Route>)>> = vec![None; full + 1];
    best[0] = Some((0.0, Vec::new()));
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest_bits = mask ^ low;
        // Enumerate every subset of `mask` that contains its lowest bit.
        let mut sub_rest = rest_bits;
        loop {
            let sub = sub_rest | low;
            if let (Some((tour_cost, tour)), Some((rest_cost, rest_routes))) =
                (&tours[sub], &best[mask ^ sub])
            {
                let cost = tour_cost + rest_cost;
                let replace = match &best[mask] {
                    None => true,
                    Some((cur, _)) if cost < cur - TIE_TOLERANCE => true,
                    Some((cur, cur_routes)) if (cost - cur).abs() <= TIE_TOLERANCE => {
                        let mut cand = rest_routes.clone();
                        cand.push(tour.clone());
                        canonical_routes(&cand) < *cur_routes
                    }
                    _ => false,
                };
                if replace {
                    let mut routes = rest_routes.clone();
                    routes.push(tour.clone());
                    best[mask] = Some((cost, canonical_routes(&routes)));
                }
            }
            if sub_rest == 0 {
                break;
            }
            sub_rest = (sub_rest - 1) & rest_bits;
        }
    }

    let (_, routes) = best[full].take().ok_or(CvrpError::Infeasible)?;
    let solution = Solution::from_checked(routes, &matrix);
    Ok(ExactOptimum { distance: solution.distance(), solution })
}

/// Held-Karp over every subset whose load fits the capacity. Returns the
/// optimal cost and canonical orientation of each feasible subset's tour.
fn shortest_tours(
    matrix: &DistanceMatrix,
    n: usize,
    load: &[u32],
    capacity: u32,
) -> Vec<Option<(f64, Route)>> {
    let full = (1usize << n) - 1;
    let mut path = vec![f64::INFINITY; (full + 1) * n];
    let mut prev = vec![usize::MAX; (full + 1) * n];
    for j in 0..n {
        path[(1 << j) * n + j] = matrix.get(0, j + 1);
    }
    for mask in 1..=full {
        if load[mask] > capacity {
            continue;
        }
        for j in 0..n {
            let here = path[mask * n + j];
            if mask & (1 << j) == 0 || !here.is_finite() {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                if load[next] > capacity {
                    continue;
                }
                let cand = here + matrix.get(j + 1, k + 1);
                if cand < path[next * n + k] {
                    path[next * n + k] = cand;
                    prev[next * n + k] = j;
                }
            }
        }
    }

    (0..=full)
        .map(|mask| {
            if mask == 0 || load[mask] > capacity {
                return None;
            }
            let (mut end, mut cost) = (usize::MAX, f64::INFINITY);
            for j in 0..n {
                if mask & (1 << j) != 0 {
                    let c = path[mask * n + j] + matrix.get(j + 1, 0);
                    if c < cost {
                        cost = c;
                        end = j;
                    }
                }
            }
            let mut order = Vec::with_capacity(mask.count_ones() as usize);
            let mut m = mask;
            let mut j = end;
            while m != 0 {
                order.push(j + 1);
                let p = prev[m * n + j];
                m &= !(1 << j);
                j = p;
            }
            order.reverse();
            let route = canonical_routes(&[Route(order)]).pop()?;
            Some((cost, route))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvrp::fixtures::instance;

    #[test]
    fn single_customer() {
        let inst = instance((0.0, 0.0), &[(0.3, 0.4, 3)], 10);
        let opt = exact_optimum(&inst).unwrap();
        assert!((opt.distance - 1.0).abs() < 1e-12);
        assert_eq!(opt.solution.routes(), &[Route(vec![1])]);
    }

    #[test]
    fn capacity_forces_split() {
        let inst = instance((0.5, 0.5), &[(0.5, 0.6, 6), (0.5, 0.7, 6)], 10);
        let opt = exact_optimum(&inst).unwrap();
        assert_eq!(opt.solution.routes(), &[Route(vec![1]), Route(vec![2])]);
        assert!((opt.distance - (0.2 + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn joins_when_capacity_allows() {
        let inst = instance((0.5, 0.5), &[(0.5, 0.6, 5), (0.5, 0.7, 5)], 10);
        let opt = exact_optimum(&inst).unwrap();
        assert_eq!(opt.solution.routes(), &[Route(vec![1, 2])]);
        assert!((opt.distance - 0.4).abs() < 1e-12);
    }

    #[test]
    fn symmetric_ties_pick_lexicographic_minimum() {
        // A square around the depot: two equally good pairings exist.
        let inst = instance(
            (0.5, 0.5),
            &[(0.4, 0.5, 5), (0.5, 0.4, 5), (0.6, 0.5, 5), (0.5, 0.6, 5)],
            10,
        );
        let opt = exact_optimum(&inst).unwrap();
        let routes = opt.solution.routes();
        assert_eq!(routes, canonical_routes(routes).as_slice());
        assert_eq!(routes[0], Route(vec![1, 2]));
    }

    #[test]
    fn refuses_large_instances() {
        let pts: Vec<(f64, f64, u32)> = (0..9).map(|i| (i as f64 / 10.0, 0.5, 1)).collect();
        let inst = instance((0.0, 0.0), &pts, 30);
        assert_eq!(
            exact_optimum(&inst).unwrap_err(),
            CvrpError::TooLarge { customers: 9, limit: 8 }
        );
    }

    #[test]
    fn canonical_orientation() {
        let c = canonical_routes(&[Route(vec![3, 1, 2]), Route(vec![5, 4])]);
        assert_eq!(c, vec![Route(vec![2, 1, 3]), Route(vec![4, 5])]);
    }
}
