//! Mission metrics computed from a time-series log.
//!
//! Terminal quantities come from the final 10% of samples and take the
//! worst value in that window. The horizontal goal is checked on the
//! payload center of mass, the vertical goal on the anchor-plane centroid
//! against z_g minus the static cable stretch (agents hold z_g + L + δ, so
//! the anchors settle one stretched cable length below).

use nalgebra::Vector3;
use serde::Serialize;

use crate::config::{ControlMode, SimConfig};
use crate::engine::TimeSeriesLog;

/// Fraction of the log, counted from the end, treated as terminal.
pub const TERMINAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Horizontal center-of-mass error (m).
    pub horizontal: f64,
    /// Azimuth and elevation error (deg).
    pub angle_deg: f64,
    /// Terminal ‖ω‖ (rad/s).
    pub spin: f64,
    /// Minimum agent–obstacle distance (m).
    pub clearance: f64,
    /// Time allowed after the wind stops for ‖ω‖ to fall below `spin` (s).
    pub recovery: f64,
}

impl Tolerances {
    pub const NOMINAL: Tolerances = Tolerances {
        horizontal: 0.5,
        angle_deg: 5.0,
        spin: 0.01,
        clearance: 1.0,
        recovery: 20.0,
    };

    /// Relaxed position and angle bands when an agent is lost.
    pub const DEGRADED: Tolerances = Tolerances {
        horizontal: 1.0,
        angle_deg: 10.0,
        ..Tolerances::NOMINAL
    };

    pub fn for_config(cfg: &SimConfig) -> Self {
        if cfg.scenario.failure.is_some() {
            Self::DEGRADED
        } else {
            Self::NOMINAL
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionMetrics {
    pub samples: usize,
    /// Start of the terminal window (s).
    pub terminal_from: f64,
    pub terminal_payload_position: [f64; 3],
    pub terminal_anchor_centroid: [f64; 3],
    /// Horizontal goal error of the center of mass (m).
    pub horizontal_error: f64,
    /// Horizontal goal error of the anchor-plane centroid (m).
    pub horizontal_error_centroid: f64,
    /// Anchor-plane centroid height against z_g − static stretch (m).
    pub vertical_error: f64,
    /// Center-of-mass height against z_g (m).
    pub vertical_error_com: f64,
    pub terminal_azimuth_deg: f64,
    pub terminal_elevation_deg: f64,
    pub azimuth_error_deg: f64,
    pub elevation_error_deg: f64,
    pub peak_spin: f64,
    pub terminal_spin: f64,
    pub min_obstacle_distance: Option<f64>,
    pub min_payload_obstacle_distance: Option<f64>,
    pub min_agent_distance: Option<f64>,
    /// First time after which the horizontal error stays inside tolerance.
    pub settle_time: Option<f64>,
    /// Time after the wind stops until ‖ω‖ stays below the spin tolerance.
    pub spin_recovery_time: Option<f64>,
    /// Largest control magnitude of the failed agent after its failure (N).
    pub failed_agent_max_control: Option<f64>,
    /// Smallest anchor tension of the failed agent over the terminal
    /// window (N); positive while it hangs from the payload.
    pub failed_agent_terminal_tension: Option<f64>,
}

/// Pass/fail per criterion; `None` when it does not apply to the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdicts {
    pub horizontal: Option<bool>,
    pub azimuth: Option<bool>,
    pub elevation: Option<bool>,
    pub terminal_spin: bool,
    pub obstacle_clearance: Option<bool>,
    pub spin_recovery: Option<bool>,
    pub failed_agent_passive: Option<bool>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        [
            self.horizontal,
            self.azimuth,
            self.elevation,
            Some(self.terminal_spin),
            self.obstacle_clearance,
            self.spin_recovery,
            self.failed_agent_passive,
        ]
        .iter()
        .all(|v| v.unwrap_or(true))
    }
}

/// Difference of two angles in degrees, wrapped to (−180, 180].
pub fn angle_difference_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn min_option(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.min(v)))
}

pub fn compute_mission_metrics(log: &TimeSeriesLog, cfg: &SimConfig) -> MissionMetrics {
    let samples = &log.samples;
    let goal = cfg.goal();
    let anchor_target = goal.z - cfg.static_cable_stretch();
    let psi_d = cfg.mission.desired_azimuth.to_degrees();
    let theta_d = cfg.mission.desired_elevation.to_degrees();
    let tol = Tolerances::for_config(cfg);
    let obstacles = cfg.obstacles();
    let failure = cfg.failure();
    let spin = |s: &crate::engine::LogSample| Vector3::from(s.angular_velocity).norm();
    let horizontal = |p: [f64; 3]| (p[0] - goal.x).hypot(p[1] - goal.y);

    let tail_len = ((samples.len() as f64 * TERMINAL_FRACTION).ceil() as usize).min(samples.len());
    let tail = &samples[samples.len() - tail_len..];

    let mut m = MissionMetrics {
        samples: samples.len(),
        terminal_from: tail.first().map_or(0.0, |s| s.time),
        terminal_payload_position: tail.last().map_or([0.0; 3], |s| s.payload_position),
        terminal_anchor_centroid: tail.last().map_or([0.0; 3], |s| s.anchor_centroid),
        horizontal_error: 0.0,
        horizontal_error_centroid: 0.0,
        vertical_error: 0.0,
        vertical_error_com: 0.0,
        terminal_azimuth_deg: tail.last().map_or(0.0, |s| s.azimuth),
        terminal_elevation_deg: tail.last().map_or(0.0, |s| s.elevation),
        azimuth_error_deg: 0.0,
        elevation_error_deg: 0.0,
        peak_spin: 0.0,
        terminal_spin: 0.0,
        min_obstacle_distance: None,
        min_payload_obstacle_distance: None,
        min_agent_distance: None,
        settle_time: None,
        spin_recovery_time: None,
        failed_agent_max_control: None,
        failed_agent_terminal_tension: None,
    };

    for s in tail {
        m.horizontal_error = m.horizontal_error.max(horizontal(s.payload_position));
        m.horizontal_error_centroid = m.horizontal_error_centroid.max(horizontal(s.anchor_centroid));
        m.vertical_error = m.vertical_error.max((s.anchor_centroid[2] - anchor_target).abs());
        m.vertical_error_com = m.vertical_error_com.max((s.payload_position[2] - goal.z).abs());
        m.azimuth_error_deg = m.azimuth_error_deg.max(angle_difference_deg(s.azimuth, psi_d).abs());
        m.elevation_error_deg = m.elevation_error_deg.max((s.elevation - theta_d).abs());
        m.terminal_spin = m.terminal_spin.max(spin(s));
        if let Some((k, _)) = failure {
            m.failed_agent_terminal_tension = min_option(m.failed_agent_terminal_tension, s.anchor_tensions[k]);
        }
    }

    let mut settled_since = None;
    for s in samples {
        m.peak_spin = m.peak_spin.max(spin(s));
        let agents: Vec<Vector3<f64>> = s.agent_positions.iter().map(|p| Vector3::from(*p)).collect();
        let payload = Vector3::from(s.payload_position);
        for o in &obstacles {
            m.min_payload_obstacle_distance = min_option(m.min_payload_obstacle_distance, (payload - o).norm());
            for a in &agents {
                m.min_obstacle_distance = min_option(m.min_obstacle_distance, (a - o).norm());
            }
        }
        for (i, a) in agents.iter().enumerate() {
            for b in &agents[i + 1..] {
                m.min_agent_distance = min_option(m.min_agent_distance, (a - b).norm());
            }
        }
        if horizontal(s.payload_position) < tol.horizontal {
            settled_since.get_or_insert(s.time);
        } else {
            settled_since = None;
        }
        if let Some((k, at)) = failure {
            if s.time >= at {
                let u = Vector3::from(s.controls[k]).norm();
                m.failed_agent_max_control = Some(m.failed_agent_max_control.map_or(u, |v| v.max(u)));
            }
        }
    }
    m.settle_time = settled_since;

    if let Some(w) = &cfg.scenario.wind {
        let after: Vec<_> = samples.iter().filter(|s| s.time >= w.end).collect();
        if !after.is_empty() {
            let last_high = after.iter().rev().find(|s| spin(s) >= tol.spin).map(|s| s.time);
            m.spin_recovery_time = match last_high {
                None => Some(0.0),
                Some(t) if t < after[after.len() - 1].time => Some(t - w.end),
                // still spinning at the end of the log
                Some(_) => None,
            };
        }
    }
    m
}

pub fn judge(metrics: &MissionMetrics, cfg: &SimConfig) -> Verdicts {
    let tol = Tolerances::for_config(cfg);
    let tracking = cfg.controller.mode == ControlMode::Full;
    // azimuth is meaningless for a level payload
    let azimuth_defined = cfg.mission.desired_elevation.cos().abs() > 1e-6;
    Verdicts {
        horizontal: tracking.then_some(metrics.horizontal_error < tol.horizontal),
        azimuth: (tracking && azimuth_defined).then_some(metrics.azimuth_error_deg < tol.angle_deg),
        elevation: tracking.then_some(metrics.elevation_error_deg < tol.angle_deg),
        terminal_spin: metrics.terminal_spin < tol.spin,
        obstacle_clearance: metrics.min_obstacle_distance.map(|d| d > tol.clearance),
        spin_recovery: cfg
            .scenario
            .wind
            .as_ref()
            .map(|_| metrics.spin_recovery_time.is_some_and(|t| t <= tol.recovery)),
        failed_agent_passive: cfg.failure().map(|_| {
            metrics.failed_agent_max_control == Some(0.0) && metrics.failed_agent_terminal_tension.is_some_and(|t| t > 0.0)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{LogSample, TimeSeriesLog};

    fn sample(time: f64, position: [f64; 3], cfg: &SimConfig) -> LogSample {
        let n = cfg.swarm.size;
        LogSample {
            time,
            payload_position: position,
            payload_velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            azimuth: cfg.mission.desired_azimuth.to_degrees(),
            elevation: cfg.mission.desired_elevation.to_degrees(),
            anchor_centroid: [position[0], position[1], position[2] + 0.25],
            swarm_center: position,
            wind_active: false,
            agent_positions: (0..n)
                .map(|k| {
                    let a = cfg.anchor(k);
                    [position[0] + a.x, position[1] + a.y, position[2] + 4.75]
                })
                .collect(),
            controls: vec![[0.0, 0.0, 40.8]; n],
            anchor_tensions: vec![28.0; n],
        }
    }

    fn log_of(samples: Vec<LogSample>) -> TimeSeriesLog {
        TimeSeriesLog {
            agents: 7,
            samples,
            events: Vec::new(),
            max_axes_drift: 0.0,
        }
    }

    #[test]
    fn perfect_terminal_state_has_zero_errors() {
        let cfg = SimConfig::case1();
        let mut goal = cfg.mission.goal;
        goal[2] -= 0.25 + cfg.static_cable_stretch();
        let log = log_of((0..20).map(|i| sample(i as f64, goal, &cfg)).collect());
        let m = compute_mission_metrics(&log, &cfg);
        assert_eq!(m.horizontal_error, 0.0);
        assert!(m.vertical_error < 1e-12);
        assert_eq!(m.azimuth_error_deg, 0.0);
        assert_eq!(m.elevation_error_deg, 0.0);
        assert_eq!(m.terminal_spin, 0.0);
        assert_eq!(m.settle_time, Some(0.0));
        assert!(judge(&m, &cfg).all_pass());
    }

    #[test]
    fn terminal_window_is_the_last_tenth() {
        let cfg = SimConfig::case2();
        let mut samples: Vec<LogSample> = (0..100).map(|i| sample(i as f64, cfg.mission.goal, &cfg)).collect();
        samples[89].payload_position[0] += 3.0;
        samples[95].payload_position[1] += 0.2;
        let m = compute_mission_metrics(&log_of(samples), &cfg);
        assert_eq!(m.terminal_from, 90.0);
        assert!((m.horizontal_error - 0.2).abs() < 1e-12);
        assert_eq!(m.settle_time, Some(90.0));
    }

    #[test]
    fn azimuth_error_wraps() {
        assert!((angle_difference_deg(179.0, -179.0) + 2.0).abs() < 1e-12);
        assert!((angle_difference_deg(-60.0, 300.0)).abs() < 1e-12);
        assert_eq!(angle_difference_deg(10.0, 5.0), 5.0);
    }

    #[test]
    fn distances_are_tracked() {
        let cfg = SimConfig::case1();
        let log = log_of(vec![sample(0.0, [6.0, 11.0, 5.25], &cfg)]);
        let m = compute_mission_metrics(&log, &cfg);
        // agents ring the obstacle at radius 4
        assert!((m.min_obstacle_distance.unwrap() - 4.0).abs() < 1e-9);
        assert!((m.min_payload_obstacle_distance.unwrap() - 4.75).abs() < 1e-9);
        // neighbours on a ring of radius 4 with seven agents
        let chord = 2.0 * 4.0 * (std::f64::consts::PI / 7.0).sin();
        assert!((m.min_agent_distance.unwrap() - chord).abs() < 1e-9);
    }

    #[test]
    fn spin_recovery_after_wind() {
        let cfg = SimConfig::case2();
        let mut samples: Vec<LogSample> = (0..150).map(|i| sample(i as f64, cfg.mission.goal, &cfg)).collect();
        for s in &mut samples[50..=72] {
            s.angular_velocity = [0.0, 0.05, 0.0];
        }
        let m = compute_mission_metrics(&log_of(samples.clone()), &cfg);
        assert_eq!(m.spin_recovery_time, Some(12.0));
        assert_eq!(judge(&m, &cfg).spin_recovery, Some(true));
        for s in &mut samples[73..=85] {
            s.angular_velocity = [0.02, 0.0, 0.0];
        }
        let m = compute_mission_metrics(&log_of(samples), &cfg);
        assert_eq!(m.spin_recovery_time, Some(25.0));
        assert_eq!(judge(&m, &cfg).spin_recovery, Some(false));
    }

    #[test]
    fn failed_agent_must_be_passive_and_loaded() {
        let cfg = SimConfig::case3();
        let mut samples: Vec<LogSample> = (0..30).map(|i| sample(i as f64, cfg.mission.goal, &cfg)).collect();
        for s in &mut samples[10..] {
            s.controls[0] = [0.0; 3];
        }
        let m = compute_mission_metrics(&log_of(samples.clone()), &cfg);
        assert_eq!(m.failed_agent_max_control, Some(0.0));
        assert_eq!(judge(&m, &cfg).failed_agent_passive, Some(true));
        // slack while falling is fine; a detached agent at the end is not
        samples[12].anchor_tensions[0] = 0.0;
        let m = compute_mission_metrics(&log_of(samples.clone()), &cfg);
        assert_eq!(judge(&m, &cfg).failed_agent_passive, Some(true));
        let mut detached = samples.clone();
        detached[29].anchor_tensions[0] = 0.0;
        let m = compute_mission_metrics(&log_of(detached), &cfg);
        assert_eq!(m.failed_agent_terminal_tension, Some(0.0));
        assert_eq!(judge(&m, &cfg).failed_agent_passive, Some(false));
        samples[20].controls[0] = [0.0, 0.0, 1e-9];
        let m = compute_mission_metrics(&log_of(samples), &cfg);
        assert_eq!(judge(&m, &cfg).failed_agent_passive, Some(false));
        assert_eq!(Tolerances::for_config(&cfg).horizontal, 1.0);
    }

    #[test]
    fn hover_skips_goal_verdicts() {
        let cfg = SimConfig::hover();
        let log = log_of(vec![sample(0.0, [0.0; 3], &cfg)]);
        let v = judge(&compute_mission_metrics(&log, &cfg), &cfg);
        assert_eq!(v.horizontal, None);
        assert_eq!(v.azimuth, None);
        assert!(v.all_pass());
    }

    #[test]
    fn empty_log_is_harmless() {
        let cfg = SimConfig::case1();
        let m = compute_mission_metrics(&log_of(Vec::new()), &cfg);
        assert_eq!(m.samples, 0);
        assert_eq!(m.min_obstacle_distance, None);
    }
}
