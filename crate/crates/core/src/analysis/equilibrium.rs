//! Static-balance checks for a hovering configuration.
//!
//! At rest every cable must hang along gravity, carry its share of the
//! payload plus the elements below each link, and the agents' lift must add
//! up to the weight of the whole system.

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::cable::CableError;
use crate::config::SimConfig;
use crate::controller::config_gravity_compensation;
use crate::engine::Model;
use crate::state::{read3, StateLayout, SystemState};

/// Node speed (m/s) and payload spin (rad/s) above which a state is not
/// considered steady.
pub const STEADY_SPEED: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error(
        "state is not steady: fastest node moves at {max_speed:e} m/s, payload spins at {angular_speed:e} rad/s"
    )]
    NotSteady { max_speed: f64, angular_speed: f64 },
    #[error("expected {expected} control inputs, got {got}")]
    ControlCount { expected: usize, got: usize },
    #[error(transparent)]
    Cable(#[from] CableError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CableBalance {
    /// Zero-based agent index.
    pub agent: usize,
    /// Angle between anchor→agent and the upward vertical (deg).
    pub angle_deg: f64,
    /// Anchor-to-agent path length minus the natural length (m).
    pub elongation: f64,
    /// (elongation − expected)/expected.
    pub relative_elongation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub time: f64,
    pub cables: Vec<CableBalance>,
    /// Static stretch of one cable, all links summed (m).
    pub expected_elongation: f64,
    /// Σu_k (N).
    pub total_lift: [f64; 3],
    /// (m_P + n(m + t_n·m_t))·g (N).
    pub total_weight: f64,
    /// Σu_k − weight·ẑ (N).
    pub lift_residual: [f64; 3],
    /// Vertical lift residual divided by the swarm size (N).
    pub lift_residual_per_agent: f64,
    /// ‖Σ (c_k − r_P) × f_k‖ over the anchor loads (N·m).
    pub moment_residual: f64,
    /// ‖m_P·r̈_P‖ (N).
    pub payload_force_residual: f64,
    /// Largest net force on any cable element or agent (N).
    pub max_node_residual: f64,
}

impl EquilibriumReport {
    pub fn max_cable_angle_deg(&self) -> f64 {
        self.cables.iter().map(|c| c.angle_deg).fold(0.0, f64::max)
    }

    pub fn max_relative_elongation_error(&self) -> f64 {
        self.cables
            .iter()
            .map(|c| c.relative_elongation_error.abs())
            .fold(0.0, f64::max)
    }
}

/// Every agent applying exactly the configured gravity compensation.
pub fn gravity_only_controls(cfg: &SimConfig) -> Vec<Vector3<f64>> {
    vec![config_gravity_compensation(cfg); cfg.swarm.size]
}

/// Checks `state` against static balance with agents applying `controls`.
pub fn verify_equilibrium(
    cfg: &SimConfig,
    state: &SystemState,
    controls: &[Vector3<f64>],
) -> Result<EquilibriumReport, EquilibriumError> {
    let n = cfg.swarm.size;
    let elements = cfg.cable.elements;
    if controls.len() != n {
        return Err(EquilibriumError::ControlCount {
            expected: n,
            got: controls.len(),
        });
    }

    let mut max_speed = state.payload_velocity().norm();
    for k in 0..n {
        max_speed = max_speed.max(state.agent_velocity(k).norm());
        for e in 0..elements {
            max_speed = max_speed.max(state.element_velocity(k, e).norm());
        }
    }
    let angular_speed = state.angular_velocity().norm();
    if max_speed > STEADY_SPEED || angular_speed > STEADY_SPEED {
        return Err(EquilibriumError::NotSteady {
            max_speed,
            angular_speed,
        });
    }

    let mut model = Model::new(cfg);
    model.controls = controls.to_vec();
    let layout = state.layout;
    let mut dy = vec![0.0; layout.len()];
    let loads = model.evaluate(state.time, &state.values, &mut dy)?;

    let rp = state.payload_position();
    let mut moment = Vector3::zeros();
    for (k, f) in loads.anchor.iter().enumerate() {
        moment += (state.anchor_position(cfg, k) - rp).cross(f);
    }

    let mut max_node = 0.0f64;
    for k in 0..n {
        max_node = max_node.max(cfg.swarm.agent_mass * read3(&dy, layout.agent_velocity(k)).norm());
        for e in 0..elements {
            max_node = max_node.max(cfg.cable.element_mass * read3(&dy, layout.element_velocity(k, e)).norm());
        }
    }

    let natural = (elements + 1) as f64 * cfg.cable.segment_length;
    let expected = cfg.static_cable_stretch();
    let cables = (0..n)
        .map(|k| {
            let anchor = state.anchor_position(cfg, k);
            let agent = state.agent_position(k);
            let span = agent - anchor;
            let mut length = 0.0;
            let mut lower = anchor;
            for e in 0..elements {
                let s = state.element_position(k, e);
                length += (s - lower).norm();
                lower = s;
            }
            length += (agent - lower).norm();
            let elongation = length - natural;
            CableBalance {
                agent: k,
                angle_deg: span.xy().norm().atan2(span.z).to_degrees(),
                elongation,
                relative_elongation_error: (elongation - expected) / expected,
            }
        })
        .collect();

    let g = cfg.environment.gravity;
    let weight = g * (cfg.payload.mass
        + n as f64 * (cfg.swarm.agent_mass + elements as f64 * cfg.cable.element_mass));
    let lift: Vector3<f64> = controls.iter().sum();
    let residual = lift - Vector3::new(0.0, 0.0, weight);

    Ok(EquilibriumReport {
        time: state.time,
        cables,
        expected_elongation: expected,
        total_lift: lift.into(),
        total_weight: weight,
        lift_residual: residual.into(),
        lift_residual_per_agent: residual.z / n as f64,
        moment_residual: moment.norm(),
        payload_force_residual: cfg.payload.mass * read3(&dy, StateLayout::PAYLOAD_VELOCITY).norm(),
        max_node_residual: max_node,
    })
}
