//! Simulation of a cable-slung rigid payload carried by a decentralized
//! swarm of point-mass agents.
//!
//! - [`config`]: parameters, presets and validation
//! - [`frame`]: inertial/body transforms
//! - [`cable`]: lumped-mass spring–damper cables
//! - [`payload`]: rigid-body payload dynamics
//! - [`controller`]: per-agent potential-field controller
//! - [`state`]: flat state vector and its layout
//! - [`integrator`]: RK4 and Dormand–Prince 5(4)
//! - [`engine`]: right-hand side assembly and the mission loop
//! - [`analysis`]: equilibrium, stability and mission metrics
//! - [`output`]: CSV / JSON writers

pub mod analysis;
pub mod cable;
pub mod config;
pub mod controller;
pub mod engine;
pub mod frame;
pub mod integrator;
pub mod output;
pub mod payload;
pub mod state;

pub use config::{ConfigError, SimConfig};
pub use engine::{run_scenario, SimError, Simulation, TimeSeriesLog};
pub use state::SystemState;
