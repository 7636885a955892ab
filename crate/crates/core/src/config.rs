//! Simulation configuration.
//!
//! A [`SimConfig`] holds every physical parameter, controller gain, scenario
//! event and integrator setting of a run. It is read from TOML files whose
//! sections mirror the struct layout; unknown keys are rejected. Angles are
//! stored in radians.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravitational acceleration used throughout (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.8;

/// Smallest admissible `|sin θ_d|`; below it the manipulation offset divides by ~0.
pub const MIN_NORMAL_Z: f64 = 0.1;

const ANCHOR_PLANE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("swarm size {size} is below the minimum of 3 agents")]
    SwarmTooSmall { size: usize },
    #[error("each cable needs at least one lumped element")]
    NoCableElements,
    #[error("`{field}` must be strictly positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("`{field}` must be non-negative (got {value})")]
    Negative { field: &'static str, value: f64 },
    #[error("`{field}` is not finite")]
    NonFinite { field: &'static str },
    #[error("expected {expected} anchor points, found {found}")]
    AnchorCount { expected: usize, found: usize },
    #[error("anchor {index} lies at body z = {z}, off the common anchor plane z = {plane}")]
    AnchorsNotCoplanar { index: usize, z: f64, plane: f64 },
    #[error("payload center of mass lies outside the convex hull of the anchor points")]
    CenterOfMassOutsideAnchors,
    #[error("desired elevation {elevation} rad gives |sin θ| < {MIN_NORMAL_Z}")]
    AttitudeInfeasible { elevation: f64 },
    #[error("wind window [{start}, {end}] is empty or reversed")]
    InvalidWindWindow { start: f64, end: f64 },
    #[error("failure agent index {index} outside 1..={size}")]
    FailureAgentOutOfRange { index: usize, size: usize },
    #[error("`{field}` = {value} is not a whole multiple of the control period {period}")]
    PeriodMismatch {
        field: &'static str,
        value: f64,
        period: f64,
    },
    #[error("failed to parse configuration: {0}")]
    Parse(String),
    #[error("failed to read configuration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// Stable machine-readable code, one per violated invariant.
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::SwarmTooSmall { .. } => "E_SWARM_SIZE",
            ConfigError::NoCableElements => "E_CABLE_ELEMENTS",
            ConfigError::NonPositive { .. } => "E_NON_POSITIVE",
            ConfigError::Negative { .. } => "E_NEGATIVE",
            ConfigError::NonFinite { .. } => "E_NON_FINITE",
            ConfigError::AnchorCount { .. } => "E_ANCHOR_COUNT",
            ConfigError::AnchorsNotCoplanar { .. } => "E_ANCHOR_PLANE",
            ConfigError::CenterOfMassOutsideAnchors => "E_COM_HULL",
            ConfigError::AttitudeInfeasible { .. } => "E_ATTITUDE",
            ConfigError::InvalidWindWindow { .. } => "E_WIND_WINDOW",
            ConfigError::FailureAgentOutOfRange { .. } => "E_FAILURE_AGENT",
            ConfigError::PeriodMismatch { .. } => "E_PERIOD",
            ConfigError::Parse(_) => "E_PARSE",
            ConfigError::Io { .. } => "E_IO",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub payload: PayloadConfig,
    pub swarm: SwarmConfig,
    pub cable: CableConfig,
    pub environment: EnvironmentConfig,
    pub mission: MissionConfig,
    pub controller: ControllerConfig,
    pub integrator: IntegratorConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub initial: InitialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadConfig {
    /// m_P (kg)
    pub mass: f64,
    /// Principal moments of inertia (kg·m²), diagonal of I_P.
    pub inertia: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    /// n
    pub size: usize,
    /// m (kg)
    pub agent_mass: f64,
    /// Cable anchor points c^B_k in the payload body frame (m), one per agent.
    pub anchors: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableConfig {
    /// t_n, lumped elements per cable.
    pub elements: usize,
    /// m_t (kg)
    pub element_mass: f64,
    /// l_free (m), natural length of one link.
    pub segment_length: f64,
    /// k_t (N/m)
    pub stiffness: f64,
    /// b_t (N·s/m)
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Magnitude of gravitational acceleration (m/s²); +z is up.
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Linear drag coefficient c applied to payload and agents (N·s/m).
    pub drag: f64,
    /// Point obstacles in inertial coordinates (m).
    #[serde(default)]
    pub obstacles: Vec<[f64; 3]>,
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    /// Payload goal r_g (m).
    pub goal: [f64; 3],
    /// ψ_d (rad)
    pub desired_azimuth: f64,
    /// θ_d (rad)
    pub desired_elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Gravity compensation, PID-shaped attractive field, repulsion and obstacle terms.
    Full,
    /// Constant gravity compensation only.
    GravityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GravityCompensation {
    /// u_g = (m + t_n·m_t + m_P/n)·g, exact for the lumped-mass cable.
    Full,
    /// u_g = (m + m_P/n)·g, cable mass neglected.
    Simplified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: ControlMode,
    pub gravity_compensation: GravityCompensation,
    /// β of the transport field.
    pub transport_beta: f64,
    /// C_S diagonal.
    pub center_gain: [f64; 3],
    /// L_S (m)
    pub center_scale: f64,
    /// C_R
    pub repulsion_gain: f64,
    /// L_R (m)
    pub repulsion_scale: f64,
    /// C_o
    pub obstacle_gain: f64,
    /// L_o (m)
    pub obstacle_scale: f64,
    /// k_z
    pub altitude_gain: f64,
    pub kp: [f64; 3],
    pub ki: [f64; 3],
    pub kd: [f64; 3],
    /// Anti-windup bound on each integral accumulator component.
    pub integral_limit: f64,
    /// R_N (m)
    pub neighbor_radius: f64,
    /// R_O (m)
    pub obstacle_radius: f64,
    /// dt_c (s)
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorMode {
    /// Embedded Dormand–Prince 5(4) with error control.
    Adaptive,
    /// Classical fourth-order Runge–Kutta at `fixed_step`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub mode: IntegratorMode,
    pub fixed_step: f64,
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindEvent {
    pub start: f64,
    pub end: f64,
    /// Force amplitude on the payload (N).
    pub amplitude: [f64; 3],
    /// Hz
    pub frequency: f64,
}

impl WindEvent {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    /// Sinusoidal force on the payload, zero outside the window.
    pub fn force(&self, t: f64) -> Vector3<f64> {
        if !self.is_active(t) {
            return Vector3::zeros();
        }
        let phase = (2.0 * PI * self.frequency * (t - self.start)).sin();
        Vector3::from(self.amplitude) * phase
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEvent {
    /// One-based agent index.
    pub agent: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub total_time: f64,
    pub log_period: f64,
    #[serde(default)]
    pub wind: Option<WindEvent>,
    #[serde(default)]
    pub failure: Option<FailureEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Payload center of mass at t = 0 (m); attitude starts at identity.
    pub payload_position: [f64; 3],
    /// Start with cables at their static hover stretch instead of natural length.
    pub pretensioned: bool,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            payload_position: [0.0; 3],
            pretensioned: true,
        }
    }
}

/// Evenly spaced anchors on a circle in the body plane `z = height`.
pub fn ring_anchors(count: usize, radius: f64, height: f64) -> Vec<[f64; 3]> {
    (0..count)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / count as f64;
            [radius * phi.cos(), radius * phi.sin(), height]
        })
        .collect()
}

impl SimConfig {
    /// Physical parameters and gains of the reference mission, no obstacles or events.
    pub fn baseline() -> Self {
        let size = 7;
        SimConfig {
            payload: PayloadConfig {
                mass: 20.0,
                inertia: [291.67, 291.67, 250.0],
            },
            swarm: SwarmConfig {
                size,
                agent_mass: 1.3,
                anchors: ring_anchors(size, 4.0, 0.25),
            },
            cable: CableConfig {
                elements: 2,
                element_mass: 0.003,
                segment_length: 1.5,
                stiffness: 10073.0,
                damping: 0.1,
            },
            environment: EnvironmentConfig {
                gravity: STANDARD_GRAVITY,
                drag: 0.5,
                obstacles: Vec::new(),
            },
            mission: MissionConfig {
                goal: [15.0, 15.0, 10.0],
                desired_azimuth: (-60.0f64).to_radians(),
                desired_elevation: 60.0f64.to_radians(),
            },
            controller: ControllerConfig {
                mode: ControlMode::Full,
                gravity_compensation: GravityCompensation::Full,
                transport_beta: 2.0,
                center_gain: [2.0, 2.0, 20.0],
                center_scale: 5.0,
                repulsion_gain: 0.1,
                repulsion_scale: 1.0,
                obstacle_gain: 500.0,
                obstacle_scale: 3.0,
                altitude_gain: 1.0,
                kp: [2.0, 2.0, 4.0],
                ki: [0.0, 0.0, 0.5],
                kd: [0.0, 0.0, 8.0],
                integral_limit: 100.0,
                neighbor_radius: 5.0,
                obstacle_radius: 6.0,
                period: 0.01,
            },
            integrator: IntegratorConfig {
                mode: IntegratorMode::Adaptive,
                fixed_step: 2.5e-4,
                rtol: 1e-6,
                atol: 1e-8,
                min_step: 1e-9,
                max_step: 0.01,
            },
            scenario: ScenarioConfig {
                total_time: 150.0,
                log_period: 0.05,
                wind: None,
                failure: None,
            },
            initial: InitialConfig::default(),
        }
    }

    /// Transport and manipulation past a point obstacle.
    pub fn case1() -> Self {
        let mut cfg = Self::baseline();
        cfg.environment.obstacles = vec![[6.0, 11.0, 10.0]];
        cfg
    }

    /// Sinusoidal wind on the payload between 50 s and 60 s.
    pub fn case2() -> Self {
        let mut cfg = Self::baseline();
        cfg.scenario.wind = Some(WindEvent {
            start: 50.0,
            end: 60.0,
            amplitude: [10.0, 10.0, 0.0],
            frequency: 1.0,
        });
        cfg
    }

    /// Loss of agent 1 at 10 s.
    pub fn case3() -> Self {
        let mut cfg = Self::baseline();
        cfg.scenario.failure = Some(FailureEvent {
            agent: 1,
            time: 10.0,
        });
        cfg
    }

    /// Gravity-compensated hover at the start point with a level payload.
    pub fn hover() -> Self {
        let mut cfg = Self::baseline();
        cfg.controller.mode = ControlMode::GravityOnly;
        cfg.mission.goal = [0.0, 0.0, 10.0];
        cfg.mission.desired_azimuth = 0.0;
        cfg.mission.desired_elevation = PI / 2.0;
        cfg.scenario.total_time = 30.0;
        cfg
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "case1" => Some(Self::case1()),
            "case2" => Some(Self::case2()),
            "case3" => Some(Self::case3()),
            "hover" => Some(Self::hover()),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.swarm.size;
        if n < 3 {
            return Err(ConfigError::SwarmTooSmall { size: n });
        }
        if self.cable.elements < 1 {
            return Err(ConfigError::NoCableElements);
        }

        let positive = [
            ("payload.mass", self.payload.mass),
            ("payload.inertia[0]", self.payload.inertia[0]),
            ("payload.inertia[1]", self.payload.inertia[1]),
            ("payload.inertia[2]", self.payload.inertia[2]),
            ("swarm.agent_mass", self.swarm.agent_mass),
            ("cable.element_mass", self.cable.element_mass),
            ("cable.segment_length", self.cable.segment_length),
            ("cable.stiffness", self.cable.stiffness),
            ("controller.center_scale", self.controller.center_scale),
            ("controller.repulsion_scale", self.controller.repulsion_scale),
            ("controller.obstacle_scale", self.controller.obstacle_scale),
            ("controller.period", self.controller.period),
            ("integrator.fixed_step", self.integrator.fixed_step),
            ("integrator.rtol", self.integrator.rtol),
            ("integrator.atol", self.integrator.atol),
            ("integrator.min_step", self.integrator.min_step),
            ("integrator.max_step", self.integrator.max_step),
            ("scenario.log_period", self.scenario.log_period),
        ];
        for (field, value) in positive {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field });
            }
            if value <= 0.0 {
                return Err(ConfigError::NonPositive { field, value });
            }
        }

        let non_negative = [
            ("cable.damping", self.cable.damping),
            ("environment.gravity", self.environment.gravity),
            ("environment.drag", self.environment.drag),
            ("controller.repulsion_gain", self.controller.repulsion_gain),
            ("controller.obstacle_gain", self.controller.obstacle_gain),
            ("controller.altitude_gain", self.controller.altitude_gain),
            ("controller.integral_limit", self.controller.integral_limit),
            ("controller.neighbor_radius", self.controller.neighbor_radius),
            ("controller.obstacle_radius", self.controller.obstacle_radius),
            ("scenario.total_time", self.scenario.total_time),
        ];
        for (field, value) in non_negative {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field });
            }
            if value < 0.0 {
                return Err(ConfigError::Negative { field, value });
            }
        }

        let finite_vectors = [
            ("mission.goal", self.mission.goal),
            ("controller.center_gain", self.controller.center_gain),
            ("controller.kp", self.controller.kp),
            ("controller.ki", self.controller.ki),
            ("controller.kd", self.controller.kd),
            ("initial.payload_position", self.initial.payload_position),
        ];
        for (field, v) in finite_vectors {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ConfigError::NonFinite { field });
            }
        }
        if !self.controller.transport_beta.is_finite() {
            return Err(ConfigError::NonFinite {
                field: "controller.transport_beta",
            });
        }
        if !self.mission.desired_azimuth.is_finite() {
            return Err(ConfigError::NonFinite {
                field: "mission.desired_azimuth",
            });
        }
        if !self.mission.desired_elevation.is_finite() {
            return Err(ConfigError::NonFinite {
                field: "mission.desired_elevation",
            });
        }

        if self.swarm.anchors.len() != n {
            return Err(ConfigError::AnchorCount {
                expected: n,
                found: self.swarm.anchors.len(),
            });
        }
        if self
            .swarm
            .anchors
            .iter()
            .chain(self.environment.obstacles.iter())
            .any(|a| a.iter().any(|x| !x.is_finite()))
        {
            return Err(ConfigError::NonFinite {
                field: "anchors/obstacles",
            });
        }
        let plane = self.swarm.anchors[0][2];
        for (index, a) in self.swarm.anchors.iter().enumerate() {
            if (a[2] - plane).abs() > ANCHOR_PLANE_TOL * plane.abs().max(1.0) {
                return Err(ConfigError::AnchorsNotCoplanar {
                    index,
                    z: a[2],
                    plane,
                });
            }
        }
        let in_plane: Vec<[f64; 2]> = self.swarm.anchors.iter().map(|a| [a[0], a[1]]).collect();
        if !origin_in_convex_hull(&in_plane) {
            return Err(ConfigError::CenterOfMassOutsideAnchors);
        }

        if self.mission.desired_elevation.sin().abs() < MIN_NORMAL_Z {
            return Err(ConfigError::AttitudeInfeasible {
                elevation: self.mission.desired_elevation,
            });
        }

        if let Some(w) = &self.scenario.wind {
            if !(w.start.is_finite() && w.end.is_finite()) || w.start >= w.end {
                return Err(ConfigError::InvalidWindWindow {
                    start: w.start,
                    end: w.end,
                });
            }
            if w.amplitude.iter().any(|x| !x.is_finite()) || !w.frequency.is_finite() {
                return Err(ConfigError::NonFinite {
                    field: "scenario.wind",
                });
            }
        }
        if let Some(f) = &self.scenario.failure {
            if f.agent < 1 || f.agent > n {
                return Err(ConfigError::FailureAgentOutOfRange {
                    index: f.agent,
                    size: n,
                });
            }
            if !f.time.is_finite() {
                return Err(ConfigError::NonFinite {
                    field: "scenario.failure.time",
                });
            }
        }

        let period = self.controller.period;
        for (field, value) in [
            ("scenario.log_period", self.scenario.log_period),
            ("scenario.total_time", self.scenario.total_time),
        ] {
            let ratio = value / period;
            if (ratio - ratio.round()).abs() > 1e-6 {
                return Err(ConfigError::PeriodMismatch {
                    field,
                    value,
                    period,
                });
            }
        }
        Ok(())
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.environment.gravity)
    }

    /// Total cable length L = l_free·(t_n + 1).
    pub fn cable_length(&self) -> f64 {
        self.cable.segment_length * (self.cable.elements + 1) as f64
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.payload.inertia))
    }

    pub fn anchor(&self, k: usize) -> Vector3<f64> {
        Vector3::from(self.swarm.anchors[k])
    }

    pub fn goal(&self) -> Vector3<f64> {
        Vector3::from(self.mission.goal)
    }

    pub fn obstacles(&self) -> Vec<Vector3<f64>> {
        self.environment
            .obstacles
            .iter()
            .map(|o| Vector3::from(*o))
            .collect()
    }

    /// Number of control ticks in the run.
    pub fn tick_count(&self) -> usize {
        (self.scenario.total_time / self.controller.period).round() as usize
    }

    /// Control ticks between logged samples.
    pub fn ticks_per_log(&self) -> usize {
        ((self.scenario.log_period / self.controller.period).round() as usize).max(1)
    }

    /// Index (zero-based) of the agent scheduled to fail, with its failure time.
    pub fn failure(&self) -> Option<(usize, f64)> {
        self.scenario
            .failure
            .as_ref()
            .map(|f| (f.agent - 1, f.time))
    }

    /// Static elongation of each link in hover, bottom (anchor side) first.
    ///
    /// The anchor link carries the payload share m_P·g/n, and every element
    /// above adds its own weight.
    pub fn static_link_stretch(&self) -> Vec<f64> {
        let g = self.environment.gravity;
        let share = self.payload.mass * g / self.swarm.size as f64;
        (0..=self.cable.elements)
            .map(|j| (share + j as f64 * self.cable.element_mass * g) / self.cable.stiffness)
            .collect()
    }

    /// Total static elongation of one cable in hover (m).
    pub fn static_cable_stretch(&self) -> f64 {
        self.static_link_stretch().iter().sum()
    }
}

/// Whether the origin lies in the closed convex hull of `points`.
///
/// Equivalent to every angular gap between consecutive points, seen from the
/// origin, being at most π.
pub fn origin_in_convex_hull(points: &[[f64; 2]]) -> bool {
    const EPS: f64 = 1e-12;
    if points.iter().any(|p| p[0].hypot(p[1]) < EPS) {
        return true;
    }
    if points.is_empty() {
        return false;
    }
    let mut angles: Vec<f64> = points.iter().map(|p| p[1].atan2(p[0])).collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let mut max_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap <= PI + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_values_load_exactly() {
        let c = SimConfig::baseline();
        assert_eq!(c.payload.mass, 20.0);
        assert_eq!(c.swarm.size, 7);
        assert_eq!(c.swarm.agent_mass, 1.3);
        assert_eq!(c.cable.element_mass, 0.003);
        assert_eq!(c.cable.elements, 2);
        assert_eq!(c.cable.segment_length, 1.5);
        assert_eq!(c.cable.stiffness, 10073.0);
        assert_eq!(c.cable.damping, 0.1);
        assert_eq!(c.controller.center_gain, [2.0, 2.0, 20.0]);
        assert_eq!(c.controller.center_scale, 5.0);
        assert_eq!(c.controller.transport_beta, 2.0);
        assert_eq!(c.controller.kp, [2.0, 2.0, 4.0]);
        assert_eq!(c.controller.ki, [0.0, 0.0, 0.5]);
        assert_eq!(c.controller.kd, [0.0, 0.0, 8.0]);
        assert_eq!(c.controller.repulsion_gain, 0.1);
        assert_eq!(c.controller.repulsion_scale, 1.0);
        assert_eq!(c.controller.obstacle_gain, 500.0);
        assert_eq!(c.controller.obstacle_scale, 3.0);
        assert_eq!(c.payload.inertia, [291.67, 291.67, 250.0]);
        c.validate().unwrap();
    }

    #[test]
    fn presets_validate() {
        for name in ["case1", "case2", "case3", "hover"] {
            SimConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(SimConfig::preset("case4").is_none());
    }

    #[test]
    fn bundled_case1_file_matches_preset() {
        let text = include_str!("../configs/case1.toml");
        let cfg = SimConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg, SimConfig::case1());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::case2();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut text = SimConfig::case1().to_toml_string();
        text = text.replace("[payload]\n", "[payload]\ncolour = \"red\"\n");
        let err = SimConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(err.code(), "E_PARSE");
    }

    #[test]
    fn each_violation_has_its_own_code() {
        let base = SimConfig::baseline();
        let mut cases: Vec<(SimConfig, &str)> = Vec::new();

        let mut c = base.clone();
        c.swarm.size = 2;
        c.swarm.anchors.truncate(2);
        cases.push((c, "E_SWARM_SIZE"));

        let mut c = base.clone();
        c.cable.elements = 0;
        cases.push((c, "E_CABLE_ELEMENTS"));

        let mut c = base.clone();
        c.cable.stiffness = 0.0;
        cases.push((c, "E_NON_POSITIVE"));

        let mut c = base.clone();
        c.environment.drag = -0.1;
        cases.push((c, "E_NEGATIVE"));

        let mut c = base.clone();
        c.payload.mass = f64::NAN;
        cases.push((c, "E_NON_FINITE"));

        let mut c = base.clone();
        c.swarm.anchors.pop();
        cases.push((c, "E_ANCHOR_COUNT"));

        let mut c = base.clone();
        c.swarm.anchors[3][2] = 0.5;
        cases.push((c, "E_ANCHOR_PLANE"));

        let mut c = base.clone();
        for a in c.swarm.anchors.iter_mut() {
            a[0] += 10.0;
        }
        cases.push((c, "E_COM_HULL"));

        let mut c = base.clone();
        c.mission.desired_elevation = 0.05;
        cases.push((c, "E_ATTITUDE"));

        let mut c = base.clone();
        c.scenario.wind = Some(WindEvent {
            start: 60.0,
            end: 50.0,
            amplitude: [1.0, 0.0, 0.0],
            frequency: 1.0,
        });
        cases.push((c, "E_WIND_WINDOW"));

        let mut c = base.clone();
        c.scenario.failure = Some(FailureEvent { agent: 8, time: 1.0 });
        cases.push((c, "E_FAILURE_AGENT"));

        let mut c = base.clone();
        c.scenario.log_period = 0.055;
        cases.push((c, "E_PERIOD"));

        let mut seen = std::collections::HashSet::new();
        for (cfg, code) in cases {
            let err = cfg.validate().unwrap_err();
            assert_eq!(err.code(), code, "{err}");
            seen.insert(code);
        }
        assert_eq!(seen.len(), 12);
    }

    #[test]
    fn convex_hull_membership() {
        let tri = [[1.0, 0.0], [-0.5, 0.8], [-0.5, -0.8]];
        assert!(origin_in_convex_hull(&tri));
        let shifted = [[1.0, 0.1], [2.0, 0.8], [2.0, -0.8]];
        assert!(!origin_in_convex_hull(&shifted));
        // origin on an edge counts as inside
        let edge = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]];
        assert!(origin_in_convex_hull(&edge));
    }

    #[test]
    fn static_stretch_matches_series_spring_statics() {
        let c = SimConfig::baseline();
        let links = c.static_link_stretch();
        assert_eq!(links.len(), 3);
        let share = 20.0 * 9.8 / 7.0;
        assert!((links[0] - share / 10073.0).abs() < 1e-15);
        assert!((links[2] - (share + 2.0 * 0.003 * 9.8) / 10073.0).abs() < 1e-15);
        // leading term (m_P g / n)(t_n + 1)/k_t = 0.00834 m
        assert!((c.static_cable_stretch() - 0.00834).abs() < 2e-5);
    }

    #[test]
    fn wind_is_zero_outside_window() {
        let w = WindEvent {
            start: 50.0,
            end: 60.0,
            amplitude: [10.0, 10.0, 0.0],
            frequency: 1.0,
        };
        assert_eq!(w.force(49.9), Vector3::zeros());
        assert_eq!(w.force(60.1), Vector3::zeros());
        let f = w.force(50.25);
        assert!((f.x - 10.0).abs() < 1e-9 && (f.y - 10.0).abs() < 1e-9);
    }
}
