//! Linear stability of the hover equilibrium.
//!
//! Around a vertical cable of stretched length γ an agent displacement
//! obeys m·δr̈ = −c·δṙ − k_eff·δr (plus cable damping along the cable),
//! with k_eff = k_t(γ − L)/(γ(t_n + 1)). The analytic roots are compared
//! against the decay of a simulated small disturbance.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ControlMode, SimConfig};
use crate::engine::{SimError, Simulation};
use crate::state::SystemState;

/// Allowed relative mismatch between simulated and predicted decay.
pub const DECAY_TOLERANCE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("cable length γ = {gamma} m does not exceed the natural length {natural} m; the linearization needs taut cables")]
    SlackEquilibrium { gamma: f64, natural: f64 },
    #[error("agent index {agent} outside the swarm of {size}")]
    AgentOutOfRange { agent: usize, size: usize },
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Lateral,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// All roots in the left half-plane; no simulation attached.
    Stable,
    /// Stable and the simulated decay agrees with the prediction.
    Consistent,
    /// Stable, but the simulated decay misses the prediction.
    Mismatch,
    /// A root or the simulated response does not decay.
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Equilibrium cable length γ (m).
    pub gamma: f64,
    /// k_t(γ − L)/(γ(t_n + 1)) (N/m).
    pub effective_stiffness: f64,
    #[serde(serialize_with = "complex_pair")]
    pub lateral_roots: [Complex64; 2],
    #[serde(serialize_with = "complex_pair")]
    pub vertical_roots: [Complex64; 2],
    /// Slowest decay rate among all channels, −max Re λ (1/s).
    pub predicted_dominant_decay: f64,
    /// Channel the simulated disturbance excites.
    pub channel: Option<Channel>,
    /// Decay rate fitted to the simulated response (1/s).
    pub simulated_decay: Option<f64>,
    /// Largest displacement seen in the fitted channel (m).
    pub peak_response: Option<f64>,
    pub verdict: Verdict,
}

fn complex_pair<S: serde::Serializer>(roots: &[Complex64; 2], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    for r in roots {
        seq.serialize_element(&[r.re, r.im])?;
    }
    seq.end()
}

impl StabilityReport {
    /// −max Re λ of `channel` (1/s).
    pub fn channel_decay(&self, channel: Channel) -> f64 {
        let roots = match channel {
            Channel::Lateral => &self.lateral_roots,
            Channel::Vertical => &self.vertical_roots,
        };
        -roots[0].re.max(roots[1].re)
    }

    pub fn all_roots_stable(&self) -> bool {
        self.lateral_roots.iter().chain(&self.vertical_roots).all(|r| r.re < 0.0)
    }

    /// Relative error of the simulated decay against its channel's prediction.
    pub fn decay_error(&self) -> Option<f64> {
        let predicted = self.channel_decay(self.channel?);
        Some((self.simulated_decay? - predicted).abs() / predicted)
    }
}

/// Roots of λ² + a·λ + b = 0.
pub fn quadratic_roots(a: f64, b: f64) -> [Complex64; 2] {
    let disc = Complex64::new(a * a - 4.0 * b, 0.0).sqrt();
    let minus_a = Complex64::new(-a, 0.0);
    [(minus_a + disc) / 2.0, (minus_a - disc) / 2.0]
}

/// Stretched cable length at the hover equilibrium of `cfg` (m).
pub fn hover_gamma(cfg: &SimConfig) -> f64 {
    natural_length(cfg) + cfg.static_cable_stretch()
}

fn natural_length(cfg: &SimConfig) -> f64 {
    (cfg.cable.elements + 1) as f64 * cfg.cable.segment_length
}

/// Closed-form roots of the linearized agent dynamics about a cable of length `gamma`.
pub fn analytic_stability_roots(cfg: &SimConfig, gamma: f64) -> Result<StabilityReport, StabilityError> {
    let natural = natural_length(cfg);
    if gamma <= natural {
        return Err(StabilityError::SlackEquilibrium { gamma, natural });
    }
    let links = (cfg.cable.elements + 1) as f64;
    let m = cfg.swarm.agent_mass;
    let c = cfg.environment.drag;
    let k_eff = cfg.cable.stiffness * (gamma - natural) / (gamma * links);
    let lateral = quadratic_roots(c / m, k_eff / m);
    let vertical = quadratic_roots((c + cfg.cable.damping / links) / m, k_eff / m);
    let slowest = lateral.iter().chain(&vertical).map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
    let mut report = StabilityReport {
        gamma,
        effective_stiffness: k_eff,
        lateral_roots: lateral,
        vertical_roots: vertical,
        predicted_dominant_decay: -slowest,
        channel: None,
        simulated_decay: None,
        peak_response: None,
        verdict: Verdict::Stable,
    };
    if !report.all_roots_stable() {
        report.verdict = Verdict::Unstable;
    }
    Ok(report)
}

/// Fraction of the running half-cycle peak an opposite-sign excursion must
/// reach before it counts as a new half-cycle; rejects high-frequency
/// ripple around zero crossings.
const CROSSING_HYSTERESIS: f64 = 0.1;

/// Largest |s| of each half-cycle, as (time, amplitude).
///
/// The final half-cycle is dropped when its maximum sits on the last
/// sample, since it was cut short.
pub fn half_cycle_peaks(times: &[f64], signal: &[f64]) -> Vec<(f64, f64)> {
    let mut peaks = Vec::new();
    let mut current: Option<(f64, f64, f64)> = None; // (sign, time, amplitude)
    for (&t, &s) in times.iter().zip(signal) {
        if s == 0.0 {
            continue;
        }
        match current {
            None => current = Some((s.signum(), t, s.abs())),
            Some((sign, _, amp)) if s.signum() != sign => {
                if s.abs() >= CROSSING_HYSTERESIS * amp {
                    let (_, pt, pa) = current.take().unwrap();
                    peaks.push((pt, pa));
                    current = Some((s.signum(), t, s.abs()));
                }
            }
            Some((sign, _, amp)) => {
                if s.abs() > amp {
                    current = Some((sign, t, s.abs()));
                }
            }
        }
    }
    if let (Some((_, t, a)), Some(&last)) = (current, times.last()) {
        if t < last || peaks.is_empty() {
            peaks.push((t, a));
        }
    }
    peaks
}

/// Least-squares slope of ln(peak) against time, negated.
pub fn fit_envelope_decay(peaks: &[(f64, f64)]) -> Option<f64> {
    if peaks.len() < 3 {
        return None;
    }
    let n = peaks.len() as f64;
    let mean_t = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = peaks.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, a) in peaks {
        sxy += (t - mean_t) * (a.ln() - mean_y);
        sxx += (t - mean_t) * (t - mean_t);
    }
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Displaces agent `agent` by `perturbation` from the hover equilibrium,
/// simulates `duration` seconds under gravity compensation and fits the
/// decay of the agent's displacement relative to its anchor, projected on
/// the perturbation direction.
pub fn measure_disturbance_decay(
    cfg: &SimConfig,
    agent: usize,
    perturbation: Vector3<f64>,
    duration: f64,
) -> Result<StabilityReport, StabilityError> {
    if agent >= cfg.swarm.size {
        return Err(StabilityError::AgentOutOfRange {
            agent,
            size: cfg.swarm.size,
        });
    }
    let mut report = analytic_stability_roots(cfg, hover_gamma(cfg))?;
    let channel = if perturbation.z.abs() > perturbation.xy().norm() {
        Channel::Vertical
    } else {
        Channel::Lateral
    };
    report.channel = Some(channel);

    let mut hover = cfg.clone();
    hover.controller.mode = ControlMode::GravityOnly;
    hover.scenario.wind = None;
    hover.scenario.failure = None;
    hover.scenario.total_time = duration;
    let base = SystemState::hover_equilibrium(&hover);
    let rest = base.agent_position(agent) - base.anchor_position(&hover, agent);

    let size = perturbation.norm();
    if size == 0.0 {
        report.simulated_decay = None;
        report.peak_response = Some(0.0);
        return Ok(report);
    }
    let direction = perturbation / size;
    let mut start = base;
    start.set_agent_position(agent, &(start.agent_position(agent) + perturbation));

    let mut sim = Simulation::with_state(&hover, start)?;
    let ticks = hover.tick_count();
    let mut times = Vec::with_capacity(ticks + 1);
    let mut signal = Vec::with_capacity(ticks + 1);
    let mut record = |sim: &Simulation| {
        let s = &sim.state;
        let offset = s.agent_position(agent) - s.anchor_position(&hover, agent) - rest;
        times.push(s.time);
        signal.push(offset.dot(&direction));
    };
    record(&sim);
    for _ in 0..ticks {
        sim.step()?;
        record(&sim);
    }

    report.peak_response = Some(signal.iter().fold(0.0f64, |m, s| m.max(s.abs())));
    let fitted = fit_envelope_decay(&half_cycle_peaks(&times, &signal));
    report.simulated_decay = fitted;
    report.verdict = match fitted {
        Some(rate) if rate > 0.0 && report.all_roots_stable() => {
            let predicted = report.channel_decay(channel);
            if (rate - predicted).abs() <= DECAY_TOLERANCE * predicted {
                Verdict::Consistent
            } else {
                Verdict::Mismatch
            }
        }
        _ => Verdict::Unstable,
    };
    Ok(report)
}
