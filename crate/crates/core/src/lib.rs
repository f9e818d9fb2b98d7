//! Local search for the capacitated vehicle routing problem with restarts
//! screened by a learned pairwise ranker.
//!
//! The crate is organised bottom-up:
//!
//! - [`cvrp`]: instances, solutions, validation and an exact oracle for tiny instances.
//! - [`neighborhood`]: the five improvement operators and the local-search loop that cycles them.
//! - [`init`]: random construction and destroy-and-repack perturbation.
//! - [`ranker`]: featurisation, the Siamese scorer, training, evaluation and a regression baseline.
//! - [`datagen`]: instance sampling and labelled pair generation.
//! - [`strategies`]: sequential and population-based restart strategies.
//! - [`harness`]: experiment orchestration and CSV output used by the CLI.

pub mod cvrp;
pub mod datagen;
pub mod harness;
pub mod init;
pub mod io;
pub mod neighborhood;
pub mod par;
pub mod ranker;
pub mod seed;
pub mod strategies;

pub use cvrp::{DistanceMatrix, Instance, Point, Route, Solution};
pub use neighborhood::{boa_improve, BoaResult, CycleBudget};
pub use par::Parallelism;
