//! Neuroevolutionary local state trajectory learning.
//!
//! A population of forward-only CNN/LSTM networks is evolved with a
//! multi-objective Pareto genetic algorithm to predict the next few ego
//! positions from a sequence of occupancy grids. The crate bundles the
//! driving simulator that produces the grids, the network and its flat
//! genome encoding, the fitness vector, Pareto machinery, the generation
//! loop, a Dynamic Window Approach baseline and the error metrics used to
//! compare the two.
//!
//! Module map:
//! - [`simworld`]: kinematic vehicle, roads and traffic, grid rendering, datasets
//! - [`neuralnet`]: conv/FC/LSTM kernels, topology, solution vectors, checkpoints
//! - [`fitness`]: the `(l1, l2, l3)` fitness vector
//! - [`pareto`]: dominance, fronts, non-dominated sorting, hypervolume
//! - [`evolve`]: genetic operators and the training loop
//! - [`dwa`]: Dynamic Window Approach baseline planner
//! - [`evalkit`]: RMSE, axis errors and comparison reports

pub mod dwa;
pub mod error;
pub mod evalkit;
pub mod evolve;
pub mod fitness;
pub mod neuralnet;
pub mod pareto;
pub mod simworld;
mod util;

pub use error::{Error, Result};

/// A 2D point or vector in meters.
pub type Point2 = [f64; 2];

pub use neuralnet::Trajectory;
