//! Decentralized artificial-potential-field controller.
//!
//! Every agent computes its own control force from its position, the
//! positions of neighbors and obstacles inside its sensing radii, the shared
//! goal and the virtual swarm center. The force is
//!
//! ```text
//! u_k = u_g + PID(0 − f_A) − ∇U_R − ∇U_O
//! ```
//!
//! where `u_g` is constant gravity compensation, `f_A` the attractive field
//! (bounded planar transport toward the swarm center plus an altitude field
//! whose plane is tilted to realize the desired payload attitude), `U_R` the
//! inter-agent repulsion and `U_O` the obstacle repulsion. Payload state is
//! never read.

use nalgebra::Vector3;
use thiserror::Error;

use crate::config::{ControlMode, GravityCompensation, SimConfig, MIN_NORMAL_Z};
use crate::payload::normal_from_angles;

/// Separation below which two sensed points are treated as coincident (m).
pub const MIN_SEPARATION: f64 = 1e-12;

/// Planar distance below which the transport direction is taken as zero (m).
pub const TRANSPORT_DEADBAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ControlError {
    #[error("desired attitude leaves |n_z| = {normal_z} below {MIN_NORMAL_Z}")]
    AttitudeInfeasible { normal_z: f64 },
    #[error("agent coincides with a sensed {kind} (separation {separation:e} m)")]
    DegenerateGeometry {
        kind: &'static str,
        separation: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredAttitude {
    pub azimuth: f64,
    pub elevation: f64,
    pub normal: Vector3<f64>,
}

impl DesiredAttitude {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, ControlError> {
        let normal = normal_from_angles(azimuth, elevation);
        if normal.z.abs() < MIN_NORMAL_Z {
            return Err(ControlError::AttitudeInfeasible { normal_z: normal.z });
        }
        Ok(DesiredAttitude {
            azimuth,
            elevation,
            normal,
        })
    }
}

/// What agent k knows at a control tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalPerception {
    /// Positions of other agents strictly inside the neighbor radius, by index.
    pub neighbors: Vec<Vector3<f64>>,
    /// Obstacles strictly inside the obstacle radius.
    pub obstacles: Vec<Vector3<f64>>,
    pub swarm_center: Vector3<f64>,
    pub goal: Vector3<f64>,
}

/// Diagonal PID gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: Vector3<f64>,
    pub ki: Vector3<f64>,
    pub kd: Vector3<f64>,
}

/// Per-agent controller memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentControllerState {
    /// Rectangle-rule integral of the error, clamped per axis.
    pub integral: Vector3<f64>,
    /// Error at the previous tick; `None` before the first sample.
    pub previous_error: Option<Vector3<f64>>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControllerState {
    pub agents: Vec<AgentControllerState>,
}

impl ControllerState {
    pub fn new(agents: usize) -> Self {
        ControllerState {
            agents: vec![AgentControllerState::default(); agents],
        }
    }
}

/// Everything an agent's control law needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub mode: ControlMode,
    pub gravity_compensation: Vector3<f64>,
    pub attitude: DesiredAttitude,
    pub transport_beta: f64,
    pub altitude_gain: f64,
    /// Total cable length L.
    pub cable_length: f64,
    pub gains: PidGains,
    pub integral_limit: f64,
    pub period: f64,
    pub repulsion_gain: f64,
    pub repulsion_scale: f64,
    pub obstacle_gain: f64,
    pub obstacle_scale: f64,
}

impl ControlParams {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, ControlError> {
        let c = &cfg.controller;
        Ok(ControlParams {
            mode: c.mode,
            gravity_compensation: config_gravity_compensation(cfg),
            attitude: DesiredAttitude::new(cfg.mission.desired_azimuth, cfg.mission.desired_elevation)?,
            transport_beta: c.transport_beta,
            altitude_gain: c.altitude_gain,
            cable_length: cfg.cable_length(),
            gains: PidGains {
                kp: Vector3::from(c.kp),
                ki: Vector3::from(c.ki),
                kd: Vector3::from(c.kd),
            },
            integral_limit: c.integral_limit,
            period: c.period,
            repulsion_gain: c.repulsion_gain,
            repulsion_scale: c.repulsion_scale,
            obstacle_gain: c.obstacle_gain,
            obstacle_scale: c.obstacle_scale,
        })
    }
}

/// Constant lift each agent provides: its own weight, its cable and an
/// equal share of the payload.
pub fn gravity_compensation(
    agent_mass: f64,
    element_mass: f64,
    elements: usize,
    payload_mass: f64,
    swarm_size: usize,
    gravity: f64,
) -> Vector3<f64> {
    let mass = agent_mass + elements as f64 * element_mass + payload_mass / swarm_size as f64;
    Vector3::new(0.0, 0.0, mass * gravity)
}

/// Gravity compensation for `cfg`, honoring the configured variant.
pub fn config_gravity_compensation(cfg: &SimConfig) -> Vector3<f64> {
    let element_mass = match cfg.controller.gravity_compensation {
        GravityCompensation::Full => cfg.cable.element_mass,
        GravityCompensation::Simplified => 0.0,
    };
    gravity_compensation(
        cfg.swarm.agent_mass,
        element_mass,
        cfg.cable.elements,
        cfg.payload.mass,
        cfg.swarm.size,
        cfg.environment.gravity,
    )
}

/// Height offset δ_k that puts agent k on the plane through the swarm
/// center with normal `normal`, clamped to `±half_range`.
pub fn manipulation_offset(
    agent: &Vector3<f64>,
    swarm_center: &Vector3<f64>,
    normal: &Vector3<f64>,
    half_range: f64,
) -> Result<f64, ControlError> {
    if normal.z.abs() < MIN_NORMAL_Z {
        return Err(ControlError::AttitudeInfeasible { normal_z: normal.z });
    }
    let delta = (-normal.x * (agent.x - swarm_center.x) - normal.y * (agent.y - swarm_center.y)) / normal.z;
    Ok(delta.clamp(-half_range, half_range))
}

/// Altitude field f_z = k_z·(z_k − (z_g + L + δ_k)).
pub fn altitude_field(z: f64, goal_z: f64, cable_length: f64, offset: f64, gain: f64) -> f64 {
    gain * (z - (goal_z + cable_length + offset))
}

/// Bounded transport field magnitude at planar distance `d` from the swarm center.
///
/// Evaluated through `A / (N + A)` with `N = (1 + e^β)²` and
/// `A = 4·e^β·sinh²(d/2)`, which is algebraically identical to the
/// product form and exact at `d = 0`. Past the midpoint it is formed as
/// `1 − N/(N + A)` so rounding cannot break monotonicity.
///
/// In binary64 the value reaches exactly 1 near d ≈ 38 (β = 2); use
/// [`transport_field_complement`] where the distance to saturation matters.
pub fn transport_field(d: f64, beta: f64) -> f64 {
    if d > 700.0 {
        return 1.0;
    }
    let eb = beta.exp();
    let n = (1.0 + eb) * (1.0 + eb);
    let s = (0.5 * d).sinh();
    let a = 4.0 * eb * s * s;
    if a <= n {
        a / (n + a)
    } else {
        1.0 - n / (n + a)
    }
}

/// `1 − transport_field(d, β)`, accurate where the field saturates.
pub fn transport_field_complement(d: f64, beta: f64) -> f64 {
    let eb = beta.exp();
    let n = (1.0 + eb) * (1.0 + eb);
    let s = (0.5 * d).sinh();
    let a = 4.0 * eb * s * s;
    n / (n + a)
}

/// Planar transport vector f_xy·(Δ_x, Δ_y, 0)/‖Δ_xy‖ with Δ = r_k − p.
pub fn transport_vector(agent: &Vector3<f64>, swarm_center: &Vector3<f64>, beta: f64) -> Vector3<f64> {
    let dx = agent.x - swarm_center.x;
    let dy = agent.y - swarm_center.y;
    let d = dx.hypot(dy);
    if d < TRANSPORT_DEADBAND {
        return Vector3::zeros();
    }
    let f = transport_field(d, beta);
    Vector3::new(f * dx / d, f * dy / d, 0.0)
}

/// Net attractive field on an agent: planar transport plus tilted altitude plane.
pub fn attractive_field(
    agent: &Vector3<f64>,
    swarm_center: &Vector3<f64>,
    goal_z: f64,
    attitude: &DesiredAttitude,
    params: &ControlParams,
) -> Result<Vector3<f64>, ControlError> {
    let delta = manipulation_offset(agent, swarm_center, &attitude.normal, 0.5 * params.cable_length)?;
    let fz = altitude_field(agent.z, goal_z, params.cable_length, delta, params.altitude_gain);
    let mut f = transport_vector(agent, swarm_center, params.transport_beta);
    f.z += fz;
    Ok(f)
}

/// One PID sample with the origin as setpoint, so the error is `−sample`.
///
/// Backward-difference derivative (zero on the first sample) and a
/// rectangle-rule integral clamped to `±integral_limit` per axis.
pub fn pid_shape(
    sample: &Vector3<f64>,
    memory: &mut AgentControllerState,
    gains: &PidGains,
    period: f64,
    integral_limit: f64,
) -> Vector3<f64> {
    let error = -sample;
    let integral = memory.integral + error * period;
    memory.integral = integral.map(|v| v.clamp(-integral_limit, integral_limit));
    let derivative = match memory.previous_error {
        Some(prev) => (error - prev) / period,
        None => Vector3::zeros(),
    };
    memory.previous_error = Some(error);
    gains.kp.component_mul(&error)
        + gains.ki.component_mul(&memory.integral)
        + gains.kd.component_mul(&derivative)
}

fn exponential_repulsion(
    agent: &Vector3<f64>,
    sources: &[Vector3<f64>],
    gain: f64,
    scale: f64,
    kind: &'static str,
) -> Result<Vector3<f64>, ControlError> {
    let mut total = Vector3::zeros();
    for s in sources {
        let r = agent - s;
        let d = r.norm();
        if d < MIN_SEPARATION {
            return Err(ControlError::DegenerateGeometry { kind, separation: d });
        }
        total += r * ((gain / scale) * (-d / scale).exp() / d);
    }
    Ok(total)
}

/// −∇ of Σ_j C_R·e^(−‖r_k − r_j‖/L_R), pointing away from neighbors.
pub fn repulsive_agent_force(
    agent: &Vector3<f64>,
    neighbors: &[Vector3<f64>],
    gain: f64,
    scale: f64,
) -> Result<Vector3<f64>, ControlError> {
    exponential_repulsion(agent, neighbors, gain, scale, "neighbor")
}

/// −∇ of Σ_o C_o·e^(−‖r_k − r_o‖/L_o), pointing away from obstacles.
pub fn obstacle_force(
    agent: &Vector3<f64>,
    obstacles: &[Vector3<f64>],
    gain: f64,
    scale: f64,
) -> Result<Vector3<f64>, ControlError> {
    exponential_repulsion(agent, obstacles, gain, scale, "obstacle")
}

/// Rate of the virtual swarm center, moving toward the goal.
///
/// The planar channel is throttled by `e^(−|ζ_z|)` until the vertical
/// error has settled.
pub fn swarm_center_derivative(
    center: &Vector3<f64>,
    goal: &Vector3<f64>,
    gain: &Vector3<f64>,
    scale: f64,
) -> Vector3<f64> {
    let zeta = goal - center;
    let dist = zeta.norm();
    if dist < TRANSPORT_DEADBAND {
        return Vector3::zeros();
    }
    let magnitude = (1.0 - (-dist / scale).exp()) / scale;
    let planar = (-zeta.z.abs()).exp();
    let shaped = Vector3::new(planar * gain.x * zeta.x, planar * gain.y * zeta.y, gain.z * zeta.z);
    shaped * (magnitude / dist)
}

/// Control force for one agent.
///
/// A failed agent returns zero. The controller memory is updated in place.
pub fn control_input(
    agent: &Vector3<f64>,
    perception: &LocalPerception,
    memory: &mut AgentControllerState,
    params: &ControlParams,
) -> Result<Vector3<f64>, ControlError> {
    if memory.failed {
        return Ok(Vector3::zeros());
    }
    match params.mode {
        ControlMode::GravityOnly => Ok(params.gravity_compensation),
        ControlMode::Full => {
            let field = attractive_field(
                agent,
                &perception.swarm_center,
                perception.goal.z,
                &params.attitude,
                params,
            )?;
            let shaped = pid_shape(&field, memory, &params.gains, params.period, params.integral_limit);
            let repulsion = repulsive_agent_force(
                agent,
                &perception.neighbors,
                params.repulsion_gain,
                params.repulsion_scale,
            )?;
            let avoidance = obstacle_force(
                agent,
                &perception.obstacles,
                params.obstacle_gain,
                params.obstacle_scale,
            )?;
            Ok(params.gravity_compensation + shaped + repulsion + avoidance)
        }
    }
}
