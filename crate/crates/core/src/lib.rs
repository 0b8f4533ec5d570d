//! Decentralized shape formation for robot swarms.
//!
//! A desired shape is a set of sample points. Each robot estimates the
//! kernel-density "mass" the swarm puts on every sample point, and moves
//! along a mass-weighted meanshift direction that drives the swarm toward
//! a uniform, dense covering of the points. The crate provides the shape
//! model, the mass metrics, the consensus protocols, the controller, a
//! deterministic closed-loop simulator and the `swarmform` CLI.

pub mod anneal;
pub mod cli;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mass;
pub mod metrics;
pub mod protocols;
pub mod shape;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::Points;
pub use mass::{Kernel, MassVector};
pub use shape::{SamplePointSet, ShapePose, WorldSampleSet};
pub use sim::{run, EventSchedule, SimConfig, Simulation};
