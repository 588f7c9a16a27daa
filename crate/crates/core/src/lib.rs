//! Multiagent coordination optimization: a PSO variant in which agents also
//! run consensus on positions and velocities over a communication graph.
//!
//! The crate provides the optimizer and a PSO baseline ([`swarm`]), benchmark
//! objectives ([`objectives`]), graph machinery ([`graph`]), a numerical
//! analyzer for the switched linear model of the iteration ([`analysis`]) and
//! an experiment harness ([`experiments`]).

pub mod analysis;
pub mod config;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod objectives;
pub mod rng;
pub mod swarm;

pub use error::{Error, Result};
