//! Right-hand side assembly and the mission loop.
//!
//! Each control tick: apply scheduled events, sense, compute every agent's
//! control, then integrate the plant across the tick with controls held
//! constant, re-orthonormalize the payload axes and check for non-finite
//! values.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cable::{anchor_kinematics, chain_dynamics, link_potential, CableError, CableParams};
use crate::config::{ConfigError, SimConfig};
use crate::controller::{
    control_input, swarm_center_derivative, ControlError, ControlParams, ControllerState, LocalPerception,
};
use crate::frame::orthonormality_error;
use crate::integrator::{Integrator, OdeSystem, StepError};
use crate::payload::{
    angular_accel, body_axes_derivative, measure_azimuth_elevation, orthonormalize, payload_translational_accel,
    Inertia, IntegrityError, Wrench,
};
use crate::state::{read3, read_axes, write3, write_axes, StateLayout, SystemState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent {agent} controller: {source}")]
    Control {
        agent: usize,
        #[source]
        source: ControlError,
    },
    #[error("at t = {time} s: {source}")]
    Cable {
        time: f64,
        #[source]
        source: CableError,
    },
    #[error("integrator step size {step:e} s fell below the minimum at t = {time} s; the system is too stiff for the configured tolerances")]
    Stiffness { time: f64, step: f64 },
    #[error("at t = {time} s: {source}")]
    Integrity {
        time: f64,
        #[source]
        source: IntegrityError,
    },
    #[error("non-finite state after t = {last_good_time} s")]
    NonFinite { last_good_time: f64 },
}

impl SimError {
    /// Process exit code: 1 for configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Agent acceleration r̈_k = (−c·ṙ_k + f_top + u_k)/m − g.
pub fn agent_acceleration(
    velocity: &Vector3<f64>,
    cable_force: &Vector3<f64>,
    control: &Vector3<f64>,
    mass: f64,
    drag: f64,
    gravity: &Vector3<f64>,
) -> Vector3<f64> {
    (-drag * velocity + cable_force + control) / mass - gravity
}

/// Other agents strictly inside `radius` of agent `k`, ordered by index.
pub fn sense_neighbors(k: usize, positions: &[Vector3<f64>], radius: f64) -> Vec<Vector3<f64>> {
    let me = positions[k];
    positions
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != k && (p - me).norm() < radius)
        .map(|(_, p)| *p)
        .collect()
}

/// Obstacles strictly inside `radius` of `position`.
pub fn sense_obstacles(position: &Vector3<f64>, obstacles: &[Vector3<f64>], radius: f64) -> Vec<Vector3<f64>> {
    obstacles
        .iter()
        .filter(|o| (*o - position).norm() < radius)
        .copied()
        .collect()
}

/// Continuous plant: payload, agents, cable elements and swarm center,
/// with agent controls held at `controls`.
#[derive(Debug, Clone)]
pub struct Model {
    pub layout: StateLayout,
    pub cable: CableParams,
    pub gravity: Vector3<f64>,
    pub inertia: Inertia,
    pub anchors: Vec<Vector3<f64>>,
    pub payload_mass: f64,
    pub agent_mass: f64,
    pub drag: f64,
    pub goal: Vector3<f64>,
    pub center_gain: Vector3<f64>,
    pub center_scale: f64,
    pub wind: Option<crate::config::WindEvent>,
    /// Zero-order-held control force of every agent.
    pub controls: Vec<Vector3<f64>>,
}

/// Forces at the two ends of every cable for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CableLoads {
    /// Force each cable applies to the payload at its anchor.
    pub anchor: Vec<Vector3<f64>>,
    /// Force each cable applies to its agent.
    pub agent: Vec<Vector3<f64>>,
}

impl Model {
    pub fn new(cfg: &SimConfig) -> Self {
        let n = cfg.swarm.size;
        Model {
            layout: StateLayout::from_config(cfg),
            cable: CableParams::from_config(cfg),
            gravity: cfg.gravity_vector(),
            inertia: Inertia::diagonal(cfg.payload.inertia),
            anchors: (0..n).map(|k| cfg.anchor(k)).collect(),
            payload_mass: cfg.payload.mass,
            agent_mass: cfg.swarm.agent_mass,
            drag: cfg.environment.drag,
            goal: cfg.goal(),
            center_gain: Vector3::from(cfg.controller.center_gain),
            center_scale: cfg.controller.center_scale,
            wind: cfg.scenario.wind.clone(),
            controls: vec![Vector3::zeros(); n],
        }
    }

    pub fn wind_force(&self, t: f64) -> Vector3<f64> {
        self.wind.as_ref().map_or(Vector3::zeros(), |w| w.force(t))
    }

    /// Full state derivative in the documented layout. Returns the cable end loads.
    pub fn evaluate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<CableLoads, CableError> {
        let layout = self.layout;
        let n = layout.agents;
        let rp = read3(y, StateLayout::PAYLOAD_POSITION);
        let vp = read3(y, StateLayout::PAYLOAD_VELOCITY);
        let omega = read3(y, StateLayout::ANGULAR_VELOCITY);
        let axes = read_axes(y);

        let mut loads = CableLoads {
            anchor: Vec::with_capacity(n),
            agent: Vec::with_capacity(n),
        };
        let mut wrench = Wrench::default();
        for k in 0..n {
            let (anchor_pos, anchor_vel) = anchor_kinematics(&rp, &vp, &omega, &axes, &self.anchors[k]);
            let agent_pos = read3(y, layout.agent_position(k));
            let agent_vel = read3(y, layout.agent_velocity(k));
            let ends = chain_dynamics(
                k,
                layout.elements,
                |e| read3(y, layout.element_position(k, e)),
                |e| read3(y, layout.element_velocity(k, e)),
                (&anchor_pos, &anchor_vel),
                (&agent_pos, &agent_vel),
                &self.cable,
                &self.gravity,
                |e, acc| {
                    let at = layout.element_position(k, e);
                    dy[at..at + 3].copy_from_slice(&y[at + 3..at + 6]);
                    write3(dy, at + 3, &acc);
                },
            )?;
            let at = layout.agent_position(k);
            dy[at..at + 3].copy_from_slice(&y[at + 3..at + 6]);
            let acc = agent_acceleration(
                &agent_vel,
                &ends.agent_force,
                &self.controls[k],
                self.agent_mass,
                self.drag,
                &self.gravity,
            );
            write3(dy, at + 3, &acc);

            wrench.force += ends.anchor_force;
            wrench.moment += (anchor_pos - rp).cross(&ends.anchor_force);
            loads.anchor.push(ends.anchor_force);
            loads.agent.push(ends.agent_force);
        }

        let external = self.wind_force(t);
        let acc = payload_translational_accel(
            &vp,
            self.payload_mass,
            self.drag,
            std::slice::from_ref(&wrench.force),
            &external,
            &self.gravity,
        );
        write3(dy, StateLayout::PAYLOAD_POSITION, &vp);
        write3(dy, StateLayout::PAYLOAD_VELOCITY, &acc);
        write3(dy, StateLayout::ANGULAR_VELOCITY, &angular_accel(&omega, &self.inertia, &wrench.moment));
        write_axes(dy, &body_axes_derivative(&axes, &omega));

        let center = read3(y, layout.swarm_center());
        let rate = swarm_center_derivative(&center, &self.goal, &self.center_gain, self.center_scale);
        write3(dy, layout.swarm_center(), &rate);
        Ok(loads)
    }

    /// Cable end loads at `state` (no derivative needed by the caller).
    pub fn loads(&self, state: &SystemState) -> Result<CableLoads, CableError> {
        let mut dy = vec![0.0; self.layout.len()];
        self.evaluate(state.time, &state.values, &mut dy)
    }
}

impl OdeSystem for Model {
    type Error = CableError;
    fn derivative(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), CableError> {
        self.evaluate(t, y, dy).map(|_| ())
    }
}

/// Total mechanical energy: kinetic (translational and rotational),
/// gravitational relative to z = 0, and elastic energy of taut links.
pub fn mechanical_energy(cfg: &SimConfig, state: &SystemState) -> f64 {
    let g = cfg.environment.gravity;
    let params = CableParams::from_config(cfg);
    let inertia = cfg.inertia_matrix();
    let omega = state.angular_velocity();
    let mut energy = 0.5 * cfg.payload.mass * state.payload_velocity().norm_squared()
        + 0.5 * omega.dot(&(inertia * omega))
        + cfg.payload.mass * g * state.payload_position().z;
    for k in 0..cfg.swarm.size {
        let agent = state.agent_position(k);
        energy += 0.5 * cfg.swarm.agent_mass * state.agent_velocity(k).norm_squared() + cfg.swarm.agent_mass * g * agent.z;
        let mut lower = state.anchor_position(cfg, k);
        for e in 0..cfg.cable.elements {
            let s = state.element_position(k, e);
            energy += 0.5 * cfg.cable.element_mass * state.element_velocity(k, e).norm_squared()
                + cfg.cable.element_mass * g * s.z
                + link_potential((s - lower).norm(), &params);
            lower = s;
        }
        energy += link_potential((agent - lower).norm(), &params);
    }
    energy
}

/// Total linear momentum of payload, agents and cable elements.
pub fn linear_momentum(cfg: &SimConfig, state: &SystemState) -> Vector3<f64> {
    let mut p = cfg.payload.mass * state.payload_velocity();
    for k in 0..cfg.swarm.size {
        p += cfg.swarm.agent_mass * state.agent_velocity(k);
        for e in 0..cfg.cable.elements {
            p += cfg.cable.element_mass * state.element_velocity(k, e);
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub time: f64,
    pub payload_position: [f64; 3],
    pub payload_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    /// Degrees.
    pub azimuth: f64,
    /// Degrees.
    pub elevation: f64,
    pub anchor_centroid: [f64; 3],
    pub swarm_center: [f64; 3],
    pub wind_active: bool,
    pub agent_positions: Vec<[f64; 3]>,
    pub controls: Vec<[f64; 3]>,
    /// Tension magnitude of each anchor link (N).
    pub anchor_tensions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub time: f64,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesLog {
    pub agents: usize,
    pub samples: Vec<LogSample>,
    pub events: Vec<LogEvent>,
    /// Largest ‖BᵀB − I‖ seen before any repair.
    pub max_axes_drift: f64,
}

/// Closed-loop simulation of one mission.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: SimConfig,
    pub model: Model,
    pub state: SystemState,
    pub controller: ControllerState,
    pub params: ControlParams,
    integrator: Integrator,
    obstacles: Vec<Vector3<f64>>,
    /// Index of the next control tick.
    pub tick: usize,
    pub max_axes_drift: f64,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        Self::with_state(cfg, SystemState::initial(cfg))
    }

    /// Starts from an arbitrary state; `state.time` sets the clock.
    pub fn with_state(cfg: &SimConfig, state: SystemState) -> Result<Self, SimError> {
        cfg.validate()?;
        let params = ControlParams::from_config(cfg).map_err(|source| SimError::Control { agent: 0, source })?;
        let layout = StateLayout::from_config(cfg);
        Ok(Simulation {
            cfg: cfg.clone(),
            model: Model::new(cfg),
            controller: ControllerState::new(cfg.swarm.size),
            params,
            integrator: Integrator::from_config(&cfg.integrator, layout.len()),
            obstacles: cfg.obstacles(),
            tick: (state.time / cfg.controller.period).round() as usize,
            state,
            max_axes_drift: 0.0,
        })
    }

    pub fn time_of(&self, tick: usize) -> f64 {
        tick as f64 * self.cfg.controller.period
    }

    /// Marks scheduled failures due at the current tick. Returns newly failed agents.
    pub fn apply_events(&mut self) -> Vec<usize> {
        let t = self.time_of(self.tick);
        let mut newly = Vec::new();
        if let Some((agent, at)) = self.cfg.failure() {
            let slack = 1e-9 * self.cfg.controller.period;
            if t >= at - slack && !self.controller.agents[agent].failed {
                self.controller.agents[agent].failed = true;
                newly.push(agent);
            }
        }
        newly
    }

    /// Sensing and control for every agent at the current state.
    pub fn compute_controls(&mut self) -> Result<(), SimError> {
        let n = self.cfg.swarm.size;
        let positions: Vec<Vector3<f64>> = (0..n).map(|k| self.state.agent_position(k)).collect();
        let center = self.state.swarm_center();
        for k in 0..n {
            let perception = LocalPerception {
                neighbors: sense_neighbors(k, &positions, self.cfg.controller.neighbor_radius),
                obstacles: sense_obstacles(&positions[k], &self.obstacles, self.cfg.controller.obstacle_radius),
                swarm_center: center,
                goal: self.model.goal,
            };
            self.model.controls[k] = control_input(&positions[k], &perception, &mut self.controller.agents[k], &self.params)
                .map_err(|source| SimError::Control { agent: k, source })?;
        }
        Ok(())
    }

    /// Integrates one control period with the current controls held.
    pub fn integrate_tick(&mut self) -> Result<(), SimError> {
        let t0 = self.time_of(self.tick);
        let t1 = self.time_of(self.tick + 1);
        let mut values = std::mem::take(&mut self.state.values);
        let result = self.integrator.advance(&mut self.model, t0, &mut values, t1);
        self.state.values = values;
        match result {
            Ok(_) => {}
            Err(StepError::System(source)) => return Err(SimError::Cable { time: t0, source }),
            Err(StepError::StepUnderflow { time, step }) => return Err(SimError::Stiffness { time, step }),
        }
        if !self.state.is_finite() {
            return Err(SimError::NonFinite { last_good_time: t0 });
        }
        let axes = self.state.axes();
        self.max_axes_drift = self.max_axes_drift.max(orthonormality_error(&axes));
        let repaired = orthonormalize(&axes).map_err(|source| SimError::Integrity { time: t1, source })?;
        self.state.set_axes(&repaired);
        self.tick += 1;
        self.state.time = t1;
        Ok(())
    }

    /// One full control tick: events, controls, integration.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.apply_events();
        self.compute_controls()?;
        self.integrate_tick()
    }

    pub fn sample(&self) -> Result<LogSample, SimError> {
        let s = &self.state;
        let loads = self.model.loads(s).map_err(|source| SimError::Cable { time: s.time, source })?;
        let (azimuth, elevation) = measure_azimuth_elevation(&s.axes());
        let n = self.cfg.swarm.size;
        Ok(LogSample {
            time: s.time,
            payload_position: s.payload_position().into(),
            payload_velocity: s.payload_velocity().into(),
            angular_velocity: s.angular_velocity().into(),
            azimuth: azimuth.to_degrees(),
            elevation: elevation.to_degrees(),
            anchor_centroid: s.anchor_centroid(&self.cfg).into(),
            swarm_center: s.swarm_center().into(),
            wind_active: self.cfg.scenario.wind.as_ref().is_some_and(|w| w.is_active(s.time)),
            agent_positions: (0..n).map(|k| s.agent_position(k).into()).collect(),
            controls: self.model.controls.iter().map(|u| (*u).into()).collect(),
            anchor_tensions: loads.anchor.iter().map(|f| f.norm()).collect(),
        })
    }

    /// Runs until `total_time`, logging every `log_period`.
    pub fn run(&mut self) -> Result<TimeSeriesLog, SimError> {
        let total = self.cfg.tick_count();
        let per_log = self.cfg.ticks_per_log();
        let mut log = TimeSeriesLog {
            agents: self.cfg.swarm.size,
            samples: Vec::with_capacity(total / per_log + 2),
            events: Vec::new(),
            max_axes_drift: 0.0,
        };
        let end_time = self.time_of(total);
        if let Some(w) = &self.cfg.scenario.wind {
            for (edge, kind) in [(w.start, "wind_start"), (w.end, "wind_end")] {
                if edge >= self.state.time && edge <= end_time {
                    log.events.push(LogEvent {
                        time: edge,
                        kind: kind.to_string(),
                    });
                }
            }
        }
        loop {
            let t = self.time_of(self.tick);
            for agent in self.apply_events() {
                log.events.push(LogEvent {
                    time: t,
                    kind: format!("failure_agent_{}", agent + 1),
                });
            }
            self.compute_controls()?;
            if self.tick.is_multiple_of(per_log) || self.tick == total {
                log.samples.push(self.sample()?);
            }
            if self.tick >= total {
                break;
            }
            self.integrate_tick()?;
        }
        log.events.sort_by(|a, b| a.time.total_cmp(&b.time));
        log.max_axes_drift = self.max_axes_drift;
        Ok(log)
    }
}

/// Simulates `cfg` from its initial state.
pub fn run_scenario(cfg: &SimConfig) -> Result<TimeSeriesLog, SimError> {
    Simulation::new(cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ControlMode, IntegratorMode};
    use approx::assert_relative_eq;

    fn g() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 9.8)
    }

    #[test]
    fn agent_acceleration_examples() {
        let hover = agent_acceleration(&Vector3::zeros(), &Vector3::zeros(), &(1.3 * g()), 1.3, 0.2, &g());
        assert!(hover.norm() < 1e-15);
        let fall = agent_acceleration(&Vector3::zeros(), &Vector3::zeros(), &Vector3::zeros(), 1.3, 0.2, &g());
        assert_eq!(fall, -g());
        // top-link tension under the baseline gravity compensation
        let tension = Vector3::new(0.0, 0.0, -(2.0 * 0.003 + 20.0 / 7.0) * 9.8);
        assert_relative_eq!(tension.norm(), 28.06, epsilon = 5e-3);
        let ug = Vector3::new(0.0, 0.0, (1.3 + 2.0 * 0.003 + 20.0 / 7.0) * 9.8);
        let a = agent_acceleration(&Vector3::zeros(), &tension, &ug, 1.3, 0.2, &g());
        assert!(a.norm() < 1e-12);
    }

    #[test]
    fn sensing_is_strict_and_ordered() {
        let p = vec![
            Vector3::zeros(),
            Vector3::new(5.0, 0.0, 0.0),
            Vector3::new(0.0, 4.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        ];
        let seen = sense_neighbors(0, &p, 5.0);
        assert_eq!(seen, vec![p[2], p[3]]);
        assert!(sense_obstacles(&Vector3::zeros(), &[], 10.0).is_empty());
        let obs = [Vector3::new(10.0, 0.0, 0.0), Vector3::new(0.0, 9.0, 0.0)];
        assert_eq!(sense_obstacles(&Vector3::zeros(), &obs, 10.0), vec![obs[1]]);
    }

    #[test]
    fn hover_equilibrium_derivative_vanishes() {
        let cfg = SimConfig::hover();
        let state = SystemState::hover_equilibrium(&cfg);
        let mut model = Model::new(&cfg);
        let ug = crate::controller::config_gravity_compensation(&cfg);
        model.controls = vec![ug; 7];
        let mut dy = vec![f64::NAN; state.values.len()];
        model.evaluate(0.0, &state.values, &mut dy).unwrap();
        // the virtual swarm center keeps moving toward the goal above
        let center = model.layout.swarm_center();
        assert!(dy[center + 2] > 3.0);
        let worst = dy[..center].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-9, "largest derivative component {worst:e}");
    }

    #[test]
    fn slack_free_fall_accelerates_everything_at_g() {
        let mut cfg = SimConfig::baseline();
        cfg.initial.pretensioned = false;
        let mut state = SystemState::initial(&cfg);
        // pull every element and agent down a little so all links are slack
        for k in 0..7 {
            for e in 0..2 {
                let p = state.element_position(k, e) - Vector3::new(0.0, 0.0, 0.1 * (e + 1) as f64);
                state.set_element_position(k, e, &p);
            }
            let p = state.agent_position(k) - Vector3::new(0.0, 0.0, 0.3);
            state.set_agent_position(k, &p);
        }
        let model = Model::new(&cfg);
        let mut dy = vec![0.0; state.values.len()];
        model.evaluate(0.0, &state.values, &mut dy).unwrap();
        let l = model.layout;
        assert_eq!(read3(&dy, StateLayout::PAYLOAD_VELOCITY), -g());
        for k in 0..7 {
            assert_eq!(read3(&dy, l.agent_velocity(k)), -g());
            for e in 0..2 {
                assert_eq!(read3(&dy, l.element_velocity(k, e)), -g());
            }
        }
    }

    #[test]
    fn zero_duration_run_logs_initial_state() {
        let mut cfg = SimConfig::hover();
        cfg.scenario.total_time = 0.0;
        let log = run_scenario(&cfg).unwrap();
        assert_eq!(log.samples.len(), 1);
        assert_eq!(log.samples[0].time, 0.0);
        assert_eq!(log.samples[0].payload_position, [0.0; 3]);
    }

    #[test]
    fn controls_are_held_between_ticks() {
        let mut cfg = SimConfig::case1();
        cfg.integrator.mode = IntegratorMode::Fixed;
        let mut sim = Simulation::new(&cfg).unwrap();
        sim.apply_events();
        sim.compute_controls().unwrap();
        let held = sim.model.controls.clone();
        sim.integrate_tick().unwrap();
        assert_eq!(sim.model.controls, held);
        assert_eq!(sim.state.time, 0.01);
    }

    #[test]
    fn failure_zeroes_control_from_the_failure_tick() {
        let mut cfg = SimConfig::case3();
        cfg.scenario.failure.as_mut().unwrap().time = 0.05;
        cfg.scenario.total_time = 0.1;
        cfg.scenario.log_period = 0.01;
        let log = run_scenario(&cfg).unwrap();
        for s in &log.samples {
            let zero = s.controls[0] == [0.0; 3];
            assert_eq!(zero, s.time >= 0.05 - 1e-12, "t = {}", s.time);
        }
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].kind, "failure_agent_1");
    }

    #[test]
    fn wind_window_is_marked() {
        let mut cfg = SimConfig::case2();
        cfg.controller.mode = ControlMode::GravityOnly;
        cfg.scenario.wind.as_mut().unwrap().start = 0.1;
        cfg.scenario.wind.as_mut().unwrap().end = 0.2;
        cfg.scenario.total_time = 0.3;
        let log = run_scenario(&cfg).unwrap();
        let kinds: Vec<(f64, &str)> = log.events.iter().map(|e| (e.time, e.kind.as_str())).collect();
        assert_eq!(kinds, vec![(0.1, "wind_start"), (0.2, "wind_end")]);
        assert!(log.samples.iter().any(|s| s.wind_active));
    }

    #[test]
    fn energy_and_momentum_of_a_resting_state() {
        let mut cfg = SimConfig::baseline();
        cfg.initial.pretensioned = false;
        let state = SystemState::initial(&cfg);
        assert_eq!(linear_momentum(&cfg, &state), Vector3::zeros());
        // natural-length links store nothing; only gravity contributes
        let (n, h) = (7.0, 0.25);
        let expected = 9.8 * n * (1.3 * (h + 4.5) + 0.003 * (2.0 * h + 1.5 + 3.0));
        assert_relative_eq!(mechanical_energy(&cfg, &state), expected, epsilon = 1e-9);
    }
}
