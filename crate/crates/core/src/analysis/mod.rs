//! Post-run verification: equilibrium, stability and mission metrics.

pub mod equilibrium;
pub mod metrics;
pub mod stability;
