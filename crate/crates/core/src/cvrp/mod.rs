//! Problem representation: instances, routes, solutions and the Euclidean
//! distance matrix.
//!
//! Node `0` is the depot; customers are numbered `1..=N` in the order they
//! appear in [`Instance::customers`].

mod exact;
mod validate;

pub use exact::{canonical_routes, exact_optimum, ExactOptimum, EXACT_MAX_CUSTOMERS};
pub use validate::{validate, ConstraintKind, ValidationReport, Violation};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Deref;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CvrpError {
    #[error("instance has no customers")]
    NoCustomers,
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("customer {customer} has demand {demand} outside 1..={capacity}")]
    Demand { customer: usize, demand: u32, capacity: u32 },
    #[error("coordinate ({x}, {y}) of node {node} lies outside the unit square")]
    Coordinate { node: usize, x: f64, y: f64 },
    #[error("node {node} out of range for an instance with {customers} customers")]
    NodeOutOfRange { node: usize, customers: usize },
    #[error("stored distance {stored} disagrees with recomputed {computed}")]
    DistanceMismatch { stored: f64, computed: f64 },
    #[error("exact oracle supports at most {limit} customers, got {customers}")]
    TooLarge { customers: usize, limit: usize },
    #[error("instance admits no feasible solution")]
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub x: f64,
    pub y: f64,
    pub demand: u32,
}

impl Customer {
    pub fn location(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A CVRP instance. Construction validates every invariant, so a value of
/// this type is always solvable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Instance {
    capacity: u32,
    depot: Point,
    customers: Vec<Customer>,
    seed: u64,
}

#[derive(Deserialize)]
struct RawInstance {
    capacity: u32,
    depot: Point,
    customers: Vec<Customer>,
    #[serde(default)]
    seed: u64,
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawInstance::deserialize(d)?;
        Instance::new(raw.depot, raw.customers, raw.capacity, raw.seed)
            .map_err(serde::de::Error::custom)
    }
}

impl Instance {
    pub fn new(
        depot: Point,
        customers: Vec<Customer>,
        capacity: u32,
        seed: u64,
    ) -> Result<Self, CvrpError> {
        if customers.is_empty() {
            return Err(CvrpError::NoCustomers);
        }
        if capacity == 0 {
            return Err(CvrpError::ZeroCapacity);
        }
        if !depot.in_unit_square() {
            return Err(CvrpError::Coordinate { node: 0, x: depot.x, y: depot.y });
        }
        for (i, c) in customers.iter().enumerate() {
            if !c.location().in_unit_square() {
                return Err(CvrpError::Coordinate { node: i + 1, x: c.x, y: c.y });
            }
            if c.demand == 0 || c.demand > capacity {
                return Err(CvrpError::Demand { customer: i + 1, demand: c.demand, capacity });
            }
        }
        Ok(Self { capacity, depot, customers, seed })
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn depot(&self) -> Point {
        self.depot
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    /// Number of customers `N`.
    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Location of node `i` (`0` is the depot).
    pub fn node(&self, i: usize) -> Point {
        if i == 0 {
            self.depot
        } else {
            self.customers[i - 1].location()
        }
    }

    /// Demand of node `i`; the depot has demand zero.
    pub fn demand(&self, i: usize) -> u32 {
        if i == 0 {
            0
        } else {
            self.customers[i - 1].demand
        }
    }

    /// Demands indexed by node, depot included at index 0.
    pub fn demands(&self) -> Vec<u32> {
        std::iter::once(0).chain(self.customers.iter().map(|c| c.demand)).collect()
    }

    pub fn distance_matrix(&self) -> DistanceMatrix {
        DistanceMatrix::new(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialises")
    }
}

/// Dense symmetric Euclidean distances over `N + 1` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(instance: &Instance) -> Self {
        let n = instance.len() + 1;
        let nodes: Vec<Point> = (0..n).map(|i| instance.node(i)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = nodes[i].dist(&nodes[j]);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    /// Number of nodes, depot included.
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Depot -> route -> depot length.
    pub fn route_length(&self, route: &[usize]) -> f64 {
        let Some((&first, _)) = route.split_first() else {
            return 0.0;
        };
        let inner: f64 = route.windows(2).map(|w| self.get(w[0], w[1])).sum();
        self.get(0, first) + inner + self.get(route[route.len() - 1], 0)
    }
}

/// One vehicle tour as an ordered list of customer indices; the depot is
/// implicit at both ends.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(pub Vec<usize>);

impl Route {
    pub fn new(customers: Vec<usize>) -> Self {
        Route(customers)
    }

    pub fn customers(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn load(&self, demands: &[u32]) -> u32 {
        self.0.iter().map(|&c| demands[c]).sum()
    }
}

impl Deref for Route {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Route {
    fn from(v: Vec<usize>) -> Self {
        Route(v)
    }
}

/// A set of routes with its cached total distance. Empty routes are pruned
/// on construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    routes: Vec<Route>,
    distance: f64,
}

impl Solution {
    /// Builds a solution and computes its distance. Fails if a route
    /// references a node outside `1..=N`.
    pub fn new(routes: Vec<Route>, matrix: &DistanceMatrix) -> Result<Self, CvrpError> {
        let customers = matrix.size() - 1;
        for r in &routes {
            if let Some(&node) = r.iter().find(|&&c| c == 0 || c > customers) {
                return Err(CvrpError::NodeOutOfRange { node, customers });
            }
        }
        Ok(Self::from_checked(routes, matrix))
    }

    pub(crate) fn from_checked(mut routes: Vec<Route>, matrix: &DistanceMatrix) -> Self {
        routes.retain(|r| !r.is_empty());
        let distance = routes.iter().map(|r| matrix.route_length(r)).sum();
        Self { routes, distance }
    }

    /// Convenience for tests and literals.
    pub fn from_vecs(routes: Vec<Vec<usize>>, matrix: &DistanceMatrix) -> Result<Self, CvrpError> {
        Self::new(routes.into_iter().map(Route).collect(), matrix)
    }

    /// Rebuilds a solution read from disk, checking the stored distance.
    pub fn from_stored(
        routes: Vec<Route>,
        stored: f64,
        matrix: &DistanceMatrix,
    ) -> Result<Self, CvrpError> {
        let s = Self::new(routes, matrix)?;
        if (s.distance - stored).abs() > 1e-9 {
            return Err(CvrpError::DistanceMismatch { stored, computed: s.distance });
        }
        Ok(s)
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn into_routes(self) -> Vec<Route> {
        self.routes
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn route_lengths(&self, matrix: &DistanceMatrix) -> Vec<f64> {
        self.routes.iter().map(|r| matrix.route_length(r)).collect()
    }
}

/// On-disk form of a [`Solution`]; turn it back into one with
/// [`SolutionFile::into_solution`], which re-checks the stored distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub routes: Vec<Route>,
    pub distance: f64,
}

impl SolutionFile {
    pub fn into_solution(self, matrix: &DistanceMatrix) -> Result<Solution, CvrpError> {
        Solution::from_stored(self.routes, self.distance, matrix)
    }
}

impl From<&Solution> for SolutionFile {
    fn from(s: &Solution) -> Self {
        SolutionFile { routes: s.routes.clone(), distance: s.distance }
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}:", self.distance)?;
        for r in &self.routes {
            write!(f, " {:?}", r.0)?;
        }
        Ok(())
    }
}

/// Sum over routes of depot -> customers -> depot legs.
pub fn solution_distance(routes: &[Route], matrix: &DistanceMatrix) -> Result<f64, CvrpError> {
    let customers = matrix.size() - 1;
    let mut total = 0.0;
    for r in routes {
        if let Some(&node) = r.iter().find(|&&c| c == 0 || c > customers) {
            return Err(CvrpError::NodeOutOfRange { node, customers });
        }
        total += matrix.route_length(r);
    }
    Ok(total)
}
