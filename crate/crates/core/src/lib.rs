//! Motion planning as shortest paths in graphs of convex sets.
//!
//! The pipeline: describe the free space as convex regions, transcribe the
//! planning problem into a [`graph::GcsProblem`], solve its convex
//! relaxation, round the fractional flow into a path, and read a piecewise
//! Bézier [`planner::Trajectory`] off the solution.
//!
//! Without the default `std` feature only the modelling layer is available;
//! supply a [`conic::ConicSolver`] implementation to solve programs.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

#[cfg(feature = "std")]
pub mod backend;
pub mod bezier;
pub mod conic;
pub mod environments;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod graph;
mod math;
pub mod planner;
pub mod preprocess;
pub mod rounding;

pub use error::{Error, Result};
