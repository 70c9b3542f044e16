//! Simulation of airship formations and swarms in a wind field.
//!
//! Three coordination approaches share one vehicle model and one harness:
//! leader/follower formations steered by polar state feedback, Reynolds
//! flocking, and a robotic particle swarm whose fitness mixes target
//! distance with social entropy.

pub mod boids;
pub mod entropy;
pub mod error;
pub mod exec;
pub mod guidance;
pub mod metrics;
pub mod mission;
pub mod output;
pub mod rng;
pub mod rpso;
pub mod scenario;
pub mod sim;
pub mod state;
pub mod vehicle;

pub use error::{Error, Result};
pub use exec::Exec;
