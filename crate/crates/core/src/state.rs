//! Flat continuous state vector.
//!
//! Layout (all 3-vectors stored x, y, z):
//!
//! | offset                   | content                               |
//! |--------------------------|---------------------------------------|
//! | 0                        | payload position r_P                  |
//! | 3                        | payload velocity                      |
//! | 6                        | angular velocity ω (inertial)         |
//! | 9..18                    | body axes B, column-major             |
//! | 18 + 6k                  | agent k position, then velocity       |
//! | 18 + 6n + 6(k·t_n + e)   | element e of cable k, pos then vel    |
//! | 18 + 6n(1 + t_n)         | swarm center p                        |
//!
//! Total length `21 + 6n(1 + t_n)`.

use nalgebra::{Matrix3, Vector3};

use crate::cable::{chain_dynamics, CableParams};
use crate::config::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub agents: usize,
    pub elements: usize,
}

impl StateLayout {
    pub const PAYLOAD_POSITION: usize = 0;
    pub const PAYLOAD_VELOCITY: usize = 3;
    pub const ANGULAR_VELOCITY: usize = 6;
    pub const AXES: usize = 9;
    const BODY_END: usize = 18;

    pub fn new(agents: usize, elements: usize) -> Self {
        StateLayout { agents, elements }
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Self::new(cfg.swarm.size, cfg.cable.elements)
    }

    pub fn agent_position(&self, k: usize) -> usize {
        Self::BODY_END + 6 * k
    }

    pub fn agent_velocity(&self, k: usize) -> usize {
        self.agent_position(k) + 3
    }

    pub fn element_position(&self, k: usize, e: usize) -> usize {
        Self::BODY_END + 6 * self.agents + 6 * (k * self.elements + e)
    }

    pub fn element_velocity(&self, k: usize, e: usize) -> usize {
        self.element_position(k, e) + 3
    }

    pub fn swarm_center(&self) -> usize {
        Self::BODY_END + 6 * self.agents * (1 + self.elements)
    }

    pub fn len(&self) -> usize {
        self.swarm_center() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[inline]
pub fn read3(values: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(values[at], values[at + 1], values[at + 2])
}

#[inline]
pub fn write3(values: &mut [f64], at: usize, v: &Vector3<f64>) {
    values[at..at + 3].copy_from_slice(v.as_slice());
}

#[inline]
pub fn read_axes(values: &[f64]) -> Matrix3<f64> {
    Matrix3::from_column_slice(&values[StateLayout::AXES..StateLayout::AXES + 9])
}

#[inline]
pub fn write_axes(values: &mut [f64], axes: &Matrix3<f64>) {
    values[StateLayout::AXES..StateLayout::AXES + 9].copy_from_slice(axes.as_slice());
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub layout: StateLayout,
    pub values: Vec<f64>,
}

impl SystemState {
    pub fn zeros(layout: StateLayout) -> Self {
        let mut values = vec![0.0; layout.len()];
        write_axes(&mut values, &Matrix3::identity());
        SystemState {
            time: 0.0,
            layout,
            values,
        }
    }

    pub fn payload_position(&self) -> Vector3<f64> {
        read3(&self.values, StateLayout::PAYLOAD_POSITION)
    }

    pub fn payload_velocity(&self) -> Vector3<f64> {
        read3(&self.values, StateLayout::PAYLOAD_VELOCITY)
    }

    pub fn angular_velocity(&self) -> Vector3<f64> {
        read3(&self.values, StateLayout::ANGULAR_VELOCITY)
    }

    pub fn axes(&self) -> Matrix3<f64> {
        read_axes(&self.values)
    }

    pub fn agent_position(&self, k: usize) -> Vector3<f64> {
        read3(&self.values, self.layout.agent_position(k))
    }

    pub fn agent_velocity(&self, k: usize) -> Vector3<f64> {
        read3(&self.values, self.layout.agent_velocity(k))
    }

    pub fn element_position(&self, k: usize, e: usize) -> Vector3<f64> {
        read3(&self.values, self.layout.element_position(k, e))
    }

    pub fn element_velocity(&self, k: usize, e: usize) -> Vector3<f64> {
        read3(&self.values, self.layout.element_velocity(k, e))
    }

    pub fn swarm_center(&self) -> Vector3<f64> {
        read3(&self.values, self.layout.swarm_center())
    }

    pub fn set_payload_position(&mut self, v: &Vector3<f64>) {
        write3(&mut self.values, StateLayout::PAYLOAD_POSITION, v);
    }

    pub fn set_payload_velocity(&mut self, v: &Vector3<f64>) {
        write3(&mut self.values, StateLayout::PAYLOAD_VELOCITY, v);
    }

    pub fn set_angular_velocity(&mut self, v: &Vector3<f64>) {
        write3(&mut self.values, StateLayout::ANGULAR_VELOCITY, v);
    }

    pub fn set_axes(&mut self, axes: &Matrix3<f64>) {
        write_axes(&mut self.values, axes);
    }

    pub fn set_agent_position(&mut self, k: usize, v: &Vector3<f64>) {
        let at = self.layout.agent_position(k);
        write3(&mut self.values, at, v);
    }

    pub fn set_agent_velocity(&mut self, k: usize, v: &Vector3<f64>) {
        let at = self.layout.agent_velocity(k);
        write3(&mut self.values, at, v);
    }

    pub fn set_element_position(&mut self, k: usize, e: usize, v: &Vector3<f64>) {
        let at = self.layout.element_position(k, e);
        write3(&mut self.values, at, v);
    }

    pub fn set_element_velocity(&mut self, k: usize, e: usize, v: &Vector3<f64>) {
        let at = self.layout.element_velocity(k, e);
        write3(&mut self.values, at, v);
    }

    pub fn set_swarm_center(&mut self, v: &Vector3<f64>) {
        let at = self.layout.swarm_center();
        write3(&mut self.values, at, v);
    }

    /// Inertial position of anchor `k`.
    pub fn anchor_position(&self, cfg: &SimConfig, k: usize) -> Vector3<f64> {
        self.payload_position() + self.axes() * cfg.anchor(k)
    }

    /// Centroid of the anchor points in inertial coordinates.
    pub fn anchor_centroid(&self, cfg: &SimConfig) -> Vector3<f64> {
        let n = cfg.swarm.size;
        let sum: Vector3<f64> = (0..n).map(|k| self.anchor_position(cfg, k)).sum();
        sum / n as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Start of a mission: payload at rest with identity attitude, each
    /// cable hanging straight up from its anchor to the agent, swarm center
    /// on the anchor-plane centroid.
    ///
    /// With `initial.pretensioned` the links carry their static hover
    /// stretch, so the gravity-compensated configuration is an exact
    /// equilibrium; otherwise every link starts at natural length.
    pub fn initial(cfg: &SimConfig) -> Self {
        let layout = StateLayout::from_config(cfg);
        let mut state = SystemState::zeros(layout);
        let rp = Vector3::from(cfg.initial.payload_position);
        state.set_payload_position(&rp);

        let stretch = if cfg.initial.pretensioned {
            cfg.static_link_stretch()
        } else {
            vec![0.0; cfg.cable.elements + 1]
        };
        let l = cfg.cable.segment_length;
        for k in 0..layout.agents {
            let anchor = state.anchor_position(cfg, k);
            let mut height = 0.0;
            for (e, s) in stretch.iter().take(layout.elements).enumerate() {
                height += l + s;
                state.set_element_position(k, e, &(anchor + Vector3::new(0.0, 0.0, height)));
            }
            height += l + stretch[layout.elements];
            state.set_agent_position(k, &(anchor + Vector3::new(0.0, 0.0, height)));
        }
        let centroid = state.anchor_centroid(cfg);
        state.set_swarm_center(&centroid);
        state
    }

    /// Static hover equilibrium of `cfg` at its initial payload position,
    /// valid under pure gravity compensation.
    ///
    /// The analytic node heights are polished by single-ulp moves so the
    /// residual node forces sit at the floating-point floor.
    pub fn hover_equilibrium(cfg: &SimConfig) -> Self {
        let mut c = cfg.clone();
        c.initial.pretensioned = true;
        let mut state = Self::initial(&c);
        let params = CableParams::from_config(cfg);
        let g = cfg.gravity_vector();
        let lift = crate::controller::config_gravity_compensation(cfg);
        for k in 0..state.layout.agents {
            polish_chain(&mut state, cfg, k, &params, &g, &lift);
        }
        state
    }
}

/// Worst node acceleration of chain `k` (elements and agent) at rest.
fn chain_residual(
    state: &SystemState,
    cfg: &SimConfig,
    k: usize,
    params: &CableParams,
    g: &Vector3<f64>,
    lift: &Vector3<f64>,
) -> f64 {
    let anchor = state.anchor_position(cfg, k);
    let agent = state.agent_position(k);
    let zero = Vector3::zeros();
    let mut worst = 0.0f64;
    let ends = chain_dynamics(
        k,
        state.layout.elements,
        |e| state.element_position(k, e),
        |_| zero,
        (&anchor, &zero),
        (&agent, &zero),
        params,
        g,
        |_, a| worst = worst.max(a.amax()),
    );
    match ends {
        Ok(ends) => worst.max(((ends.agent_force + lift) / cfg.swarm.agent_mass - g).amax()),
        Err(_) => f64::INFINITY,
    }
}

fn polish_chain(
    state: &mut SystemState,
    cfg: &SimConfig,
    k: usize,
    params: &CableParams,
    g: &Vector3<f64>,
    lift: &Vector3<f64>,
) {
    const REACH: i32 = 6;
    let elements = state.layout.elements;
    let slots: Vec<usize> = (0..elements)
        .map(|e| state.layout.element_position(k, e) + 2)
        .chain(std::iter::once(state.layout.agent_position(k) + 2))
        .collect();
    // joint search is only affordable for short chains
    if slots.len() > 4 {
        return;
    }
    let base: Vec<f64> = slots.iter().map(|&at| state.values[at]).collect();
    let shift = |v: f64, by: i32| {
        let mut v = v;
        for _ in 0..by.abs() {
            v = if by > 0 { v.next_up() } else { v.next_down() };
        }
        v
    };
    let span = (2 * REACH + 1) as usize;
    let mut best = (chain_residual(state, cfg, k, params, g, lift), base.clone());
    for code in 0..span.pow(slots.len() as u32) {
        let mut c = code;
        for (i, &at) in slots.iter().enumerate() {
            state.values[at] = shift(base[i], (c % span) as i32 - REACH);
            c /= span;
        }
        let r = chain_residual(state, cfg, k, params, g, lift);
        if r < best.0 {
            best = (r, slots.iter().map(|&at| state.values[at]).collect());
        }
    }
    for (&at, v) in slots.iter().zip(&best.1) {
        state.values[at] = *v;
    }
}
