use super::{Move, MoveKind, NeighborhoodError, IMPROVEMENT_THRESHOLD};
use crate::cvrp::{DistanceMatrix, Instance, Route};

/// Operator context: distances, demands and capacity of one instance.
#[derive(Clone, Debug)]
pub struct Neighborhood<'a> {
    matrix: &'a DistanceMatrix,
    demands: Vec<u32>,
    capacity: u32,
}

/// Tracks the best strictly improving candidate seen so far. Earlier
/// candidates win ties.
struct Best {
    delta: f64,
    kind: Option<MoveKind>,
}

impl Best {
    fn new() -> Self {
        Best { delta: -IMPROVEMENT_THRESHOLD, kind: None }
    }

    #[inline]
    fn offer(&mut self, delta: f64, kind: impl FnOnce() -> MoveKind) {
        if delta < self.delta {
            self.delta = delta;
            self.kind = Some(kind());
        }
    }

    fn finish(self) -> Option<Move> {
        self.kind.map(|kind| Move { kind, delta: self.delta })
    }
}

/// Node at position `p` of `route`, with the depot before index 0 and at
/// index `len`.
#[inline]
fn at(route: &[usize], p: isize) -> usize {
    if p < 0 || p as usize >= route.len() {
        0
    } else {
        route[p as usize]
    }
}

impl<'a> Neighborhood<'a> {
    pub fn new(instance: &Instance, matrix: &'a DistanceMatrix) -> Self {
        Self { matrix, demands: instance.demands(), capacity: instance.capacity() }
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        self.matrix
    }

    #[inline]
    fn d(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    fn load(&self, route: &[usize]) -> u32 {
        route.iter().map(|&c| self.demands[c]).sum()
    }

    fn check(routes: &[Route], index: usize) -> Result<&[usize], NeighborhoodError> {
        routes
            .get(index)
            .map(|r| r.customers())
            .ok_or(NeighborhoodError::RouteIndex { index, routes: routes.len() })
    }

    fn check_pair<'r>(
        routes: &'r [Route],
        first: usize,
        second: usize,
    ) -> Result<(&'r [usize], &'r [usize]), NeighborhoodError> {
        let a = Self::check(routes, first)?;
        let b = Self::check(routes, second)?;
        if first == second {
            return Err(NeighborhoodError::SameRoute(first));
        }
        Ok((a, b))
    }

    /// Best segment reversal inside one route.
    pub fn two_opt(&self, routes: &[Route], route: usize) -> Result<Option<Move>, NeighborhoodError> {
        let r = Self::check(routes, route)?;
        let len = r.len();
        let mut best = Best::new();
        if len < 3 {
            return Ok(None);
        }
        for i in 0..len - 1 {
            let before = at(r, i as isize - 1);
            let first = r[i];
            let removed_front = self.d(before, first);
            for j in (i + 1)..len {
                // Reversing the whole route only flips its direction.
                if i == 0 && j == len - 1 {
                    continue;
                }
                let last = r[j];
                let after = at(r, j as isize + 1);
                let delta = self.d(before, last) + self.d(first, after)
                    - removed_front
                    - self.d(last, after);
                best.offer(delta, || MoveKind::TwoOpt { route, i, j });
            }
        }
        Ok(best.finish())
    }

    /// Best repositioning of one customer within its route.
    pub fn relocate_intra(
        &self,
        routes: &[Route],
        route: usize,
    ) -> Result<Option<Move>, NeighborhoodError> {
        let r = Self::check(routes, route)?;
        let len = r.len();
        let mut best = Best::new();
        if len < 2 {
            return Ok(None);
        }
        for from in 0..len {
            let c = r[from];
            let prev = at(r, from as isize - 1);
            let next = at(r, from as isize + 1);
            let removal = self.d(prev, next) - self.d(prev, c) - self.d(c, next);
            // Positions in the route with `c` taken out.
            let rest = |k: isize| if k < from as isize { at(r, k) } else { at(r, k + 1) };
            for to in 0..len {
                if to == from {
                    continue;
                }
                let u = rest(to as isize - 1);
                let v = rest(to as isize);
                let delta = removal + self.d(u, c) + self.d(c, v) - self.d(u, v);
                best.offer(delta, || MoveKind::RelocateIntra { route, from, to });
            }
        }
        Ok(best.finish())
    }

    /// Best capacity-feasible exchange of route tails. Either tail may be
    /// empty; a route left empty is dropped when the move is applied.
    pub fn cross(
        &self,
        routes: &[Route],
        first: usize,
        second: usize,
    ) -> Result<Option<Move>, NeighborhoodError> {
        let (a, b) = Self::check_pair(routes, first, second)?;
        let prefix = |r: &[usize]| -> Vec<u32> {
            let mut p = vec![0u32; r.len() + 1];
            for (k, &c) in r.iter().enumerate() {
                p[k + 1] = p[k] + self.demands[c];
            }
            p
        };
        let pa = prefix(a);
        let pb = prefix(b);
        let (load_a, load_b) = (pa[a.len()], pb[b.len()]);
        let mut best = Best::new();
        for i in 0..=a.len() {
            let a_prev = at(a, i as isize - 1);
            let a_next = at(a, i as isize);
            for j in 0..=b.len() {
                let identity = i == a.len() && j == b.len();
                let full_swap = i == 0 && j == 0;
                if identity || full_swap {
                    continue;
                }
                if pa[i] + (load_b - pb[j]) > self.capacity || pb[j] + (load_a - pa[i]) > self.capacity
                {
                    continue;
                }
                let b_prev = at(b, j as isize - 1);
                let b_next = at(b, j as isize);
                let delta = self.d(a_prev, b_next) + self.d(b_prev, a_next)
                    - self.d(a_prev, a_next)
                    - self.d(b_prev, b_next);
                best.offer(delta, || MoveKind::Cross {
                    first,
                    second,
                    cut_first: i,
                    cut_second: j,
                });
            }
        }
        Ok(best.finish())
    }

    /// Best capacity-feasible swap of one customer from each route.
    pub fn symmetric_exchange(
        &self,
        routes: &[Route],
        first: usize,
        second: usize,
    ) -> Result<Option<Move>, NeighborhoodError> {
        let (a, b) = Self::check_pair(routes, first, second)?;
        let (load_a, load_b) = (self.load(a), self.load(b));
        let mut best = Best::new();
        for i in 0..a.len() {
            let x = a[i];
            let (ap, an) = (at(a, i as isize - 1), at(a, i as isize + 1));
            let out_a = self.d(ap, x) + self.d(x, an);
            for j in 0..b.len() {
                let y = b[j];
                let (dx, dy) = (self.demands[x], self.demands[y]);
                if load_a - dx + dy > self.capacity || load_b - dy + dx > self.capacity {
                    continue;
                }
                let (bp, bn) = (at(b, j as isize - 1), at(b, j as isize + 1));
                let delta = self.d(ap, y) + self.d(y, an) - out_a + self.d(bp, x) + self.d(x, bn)
                    - self.d(bp, y)
                    - self.d(y, bn);
                best.offer(delta, || MoveKind::SymmetricExchange {
                    first,
                    second,
                    pos_first: i,
                    pos_second: j,
                });
            }
        }
        Ok(best.finish())
    }

    /// Best capacity-feasible move of one customer from `from` into `to`.
    pub fn relocate_inter(
        &self,
        routes: &[Route],
        from: usize,
        to: usize,
    ) -> Result<Option<Move>, NeighborhoodError> {
        let (a, b) = Self::check_pair(routes, from, to)?;
        let load_b = self.load(b);
        let mut best = Best::new();
        for i in 0..a.len() {
            let x = a[i];
            if load_b + self.demands[x] > self.capacity {
                continue;
            }
            let (ap, an) = (at(a, i as isize - 1), at(a, i as isize + 1));
            let removal = self.d(ap, an) - self.d(ap, x) - self.d(x, an);
            for j in 0..=b.len() {
                let (u, v) = (at(b, j as isize - 1), at(b, j as isize));
                let delta = removal + self.d(u, x) + self.d(x, v) - self.d(u, v);
                best.offer(delta, || MoveKind::RelocateInter {
                    from_route: from,
                    from_pos: i,
                    to_route: to,
                    to_pos: j,
                });
            }
        }
        Ok(best.finish())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvrp::fixtures::instance;
    use crate::cvrp::{validate, Solution};
    use crate::neighborhood::Operator;

    fn routes(v: Vec<Vec<usize>>) -> Vec<Route> {
        v.into_iter().map(Route).collect()
    }

    /// Every ordering of `items`.
    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for k in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(k);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    fn check_delta(inst: &Instance, before: &[Route], mv: &Move) {
        let m = inst.distance_matrix();
        let s = Solution::new(before.to_vec(), &m).unwrap();
        let after = mv.apply(&s, &m);
        assert!((after.distance() - s.distance() - mv.delta).abs() < 1e-9, "{mv:?}");
        assert!(validate(inst, &after).feasible);
    }

    #[test]
    fn two_opt_fixes_crossing() {
        let inst = instance((0.0, 0.0), &[(1.0, 0.0, 1), (0.0, 1.0, 1), (1.0, 1.0, 1)], 10);
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![1, 2, 3]]);
        let mv = nb.two_opt(&rs, 0).unwrap().unwrap();
        // Exhaustive: best order costs 4, current costs 2 + 2 sqrt 2.
        let best = permutations(&[1, 2, 3])
            .iter()
            .map(|p| m.route_length(p))
            .fold(f64::INFINITY, f64::min);
        assert!((best - 4.0).abs() < 1e-12);
        assert!((mv.delta - (4.0 - (2.0 + 2.0 * 2f64.sqrt()))).abs() < 1e-12);
        assert_eq!(mv.kind, MoveKind::TwoOpt { route: 0, i: 1, j: 2 });
        let mut after = rs.clone();
        mv.apply_to(&mut after);
        assert_eq!(after, routes(vec![vec![1, 3, 2]]));
        check_delta(&inst, &rs, &mv);
    }

    #[test]
    fn two_opt_short_or_optimal_routes() {
        let inst = instance((0.0, 0.0), &[(1.0, 0.0, 1), (0.0, 1.0, 1), (1.0, 1.0, 1)], 10);
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        assert_eq!(nb.two_opt(&routes(vec![vec![1, 2]]), 0).unwrap(), None);
        assert_eq!(nb.two_opt(&routes(vec![vec![1, 3, 2]]), 0).unwrap(), None);
        assert_eq!(
            nb.two_opt(&routes(vec![vec![1, 3, 2]]), 1),
            Err(NeighborhoodError::RouteIndex { index: 1, routes: 1 })
        );
    }

    #[test]
    fn relocate_intra_moves_last_to_front() {
        // [2, 3, 1] visits the customer next to the depot last.
        let inst = instance((0.0, 0.0), &[(0.1, 0.0, 1), (0.5, 0.1, 1), (0.5, 0.4, 1)], 10);
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![2, 3, 1]]);
        let mv = nb.relocate_intra(&rs, 0).unwrap().unwrap();
        // Enumerate every single reposition.
        let base = m.route_length(&rs[0]);
        let mut best = 0.0f64;
        for from in 0..3 {
            for to in 0..3 {
                let mut v = rs[0].0.clone();
                let c = v.remove(from);
                v.insert(to, c);
                best = best.min(m.route_length(&v) - base);
            }
        }
        assert!(best < -0.01);
        assert!((mv.delta - best).abs() < 1e-12);
        check_delta(&inst, &rs, &mv);
        let mut after = rs.clone();
        mv.apply_to(&mut after);
        assert!(after == routes(vec![vec![1, 2, 3]]) || after == routes(vec![vec![3, 2, 1]]));

        assert_eq!(nb.relocate_intra(&routes(vec![vec![1]]), 0).unwrap(), None);
        assert_eq!(nb.relocate_intra(&routes(vec![vec![1, 2, 3]]), 0).unwrap(), None);
    }

    #[test]
    fn cross_swaps_tails() {
        // Route 0 goes out east then jumps north; route 1 mirrors it.
        let inst = instance(
            (0.5, 0.5),
            &[(0.9, 0.5, 1), (0.5, 0.95, 1), (0.5, 0.9, 1), (0.95, 0.5, 1)],
            2,
        );
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![1, 2], vec![3, 4]]);
        let mv = nb.cross(&rs, 0, 1).unwrap().unwrap();
        assert_eq!(mv.kind, MoveKind::Cross { first: 0, second: 1, cut_first: 1, cut_second: 1 });
        check_delta(&inst, &rs, &mv);

        // Any capacity-respecting tail swap is enumerated.
        let base = m.route_length(&rs[0]) + m.route_length(&rs[1]);
        let mut best = 0.0f64;
        for i in 0..=2 {
            for j in 0..=2 {
                let na: Vec<usize> = rs[0][..i].iter().chain(&rs[1][j..]).copied().collect();
                let nb_: Vec<usize> = rs[1][..j].iter().chain(&rs[0][i..]).copied().collect();
                if na.len() <= 2 && nb_.len() <= 2 {
                    best = best.min(m.route_length(&na) + m.route_length(&nb_) - base);
                }
            }
        }
        assert!((mv.delta - best).abs() < 1e-12);
    }

    #[test]
    fn cross_respects_capacity() {
        // Same geometry but the improving swap would overload a route.
        let inst = instance(
            (0.5, 0.5),
            &[(0.9, 0.5, 1), (0.5, 0.95, 5), (0.5, 0.9, 5), (0.95, 0.5, 1)],
            6,
        );
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![1, 2], vec![3, 4]]);
        if let Some(mv) = nb.cross(&rs, 0, 1).unwrap() {
            let mut after = rs.clone();
            mv.apply_to(&mut after);
            let d = inst.demands();
            assert!(after.iter().all(|r| r.load(&d) <= 6));
        }
    }

    #[test]
    fn cross_on_opposite_singletons_is_none() {
        let inst = instance((0.5, 0.5), &[(0.0, 0.5, 1), (1.0, 0.5, 1)], 10);
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        assert_eq!(nb.cross(&routes(vec![vec![1], vec![2]]), 0, 1).unwrap(), None);
        assert_eq!(nb.cross(&routes(vec![vec![1], vec![2]]), 1, 1), Err(NeighborhoodError::SameRoute(1)));
    }

    #[test]
    fn symmetric_exchange_cases() {
        // Customers 1 and 3 sit west, 2 and 4 east; routes mix them up.
        let inst = instance(
            (0.5, 0.5),
            &[(0.1, 0.5, 3), (0.9, 0.5, 3), (0.1, 0.6, 3), (0.9, 0.6, 3)],
            6,
        );
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![1, 4], vec![2, 3]]);
        let mv = nb.symmetric_exchange(&rs, 0, 1).unwrap().unwrap();
        assert!(mv.delta < 0.0);
        check_delta(&inst, &rs, &mv);

        // Full routes with unequal demands cannot swap.
        let tight = instance(
            (0.5, 0.5),
            &[(0.1, 0.5, 2), (0.9, 0.5, 4), (0.1, 0.6, 4), (0.9, 0.6, 2)],
            6,
        );
        let m2 = tight.distance_matrix();
        let nb2 = Neighborhood::new(&tight, &m2);
        let rs2 = routes(vec![vec![1, 2], vec![3, 4]]);
        if let Some(mv) = nb2.symmetric_exchange(&rs2, 0, 1).unwrap() {
            let mut after = rs2.clone();
            mv.apply_to(&mut after);
            assert!(after.iter().all(|r| r.load(&tight.demands()) <= 6));
        }

        // Identical customers: swapping them changes nothing.
        let twins = instance((0.5, 0.5), &[(0.2, 0.3, 4), (0.2, 0.3, 4)], 10);
        let m3 = twins.distance_matrix();
        let nb3 = Neighborhood::new(&twins, &m3);
        assert_eq!(nb3.symmetric_exchange(&routes(vec![vec![1], vec![2]]), 0, 1).unwrap(), None);
    }

    #[test]
    fn relocate_inter_empties_singleton() {
        // Customer 3 lies on the segment between 1 and 2.
        let inst = instance((0.0, 0.0), &[(0.5, 0.0, 1), (0.5, 0.5, 1), (0.5, 0.25, 1)], 10);
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![3], vec![1, 2]]);
        let mv = nb.relocate_inter(&rs, 0, 1).unwrap().unwrap();
        assert_eq!(mv.kind, MoveKind::RelocateInter { from_route: 0, from_pos: 0, to_route: 1, to_pos: 1 });
        // Gain is twice the depot distance of customer 3 (detour is zero).
        assert!((mv.delta + 2.0 * m.get(0, 3)).abs() < 1e-12);
        let mut after = rs.clone();
        mv.apply_to(&mut after);
        assert_eq!(after, routes(vec![vec![1, 3, 2]]));
        check_delta(&inst, &rs, &mv);
    }

    #[test]
    fn relocate_inter_into_full_route_is_none() {
        let inst = instance((0.0, 0.0), &[(0.5, 0.0, 5), (0.5, 0.5, 5), (0.5, 0.25, 1)], 10);
        let m = inst.distance_matrix();
        let nb = Neighborhood::new(&inst, &m);
        let rs = routes(vec![vec![3], vec![1, 2]]);
        assert_eq!(nb.relocate_inter(&rs, 0, 1).unwrap(), None);
    }

    #[test]
    fn operator_cycle_order() {
        assert_eq!(Operator::CYCLE[0], Operator::TwoOpt);
        assert_eq!(Operator::CYCLE[4], Operator::RelocateInter);
    }
}
