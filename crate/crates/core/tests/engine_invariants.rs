use cableswarm::config::IntegratorMode;
use cableswarm::engine::{linear_momentum, mechanical_energy, Model};
use cableswarm::integrator::Integrator;
use cableswarm::output::write_time_series;
use cableswarm::payload::orthonormalize;
use cableswarm::{run_scenario, SimConfig, SystemState};
use nalgebra::Vector3;

/// Baseline swarm in free space with every dissipative term removed, released
/// from the stretched hover shape with a spin, a drift and a swirl of the
/// agents so that every subsystem exchanges energy.
fn free_space() -> (SimConfig, SystemState) {
    let stretched = SystemState::initial(&SimConfig::baseline());
    let mut cfg = SimConfig::baseline();
    cfg.environment.gravity = 0.0;
    cfg.environment.drag = 0.0;
    cfg.cable.damping = 0.0;
    cfg.scenario.wind = None;

    let mut state = stretched;
    state.set_payload_velocity(&Vector3::new(0.3, -0.2, 0.1));
    state.set_angular_velocity(&Vector3::new(0.05, -0.02, 0.4));
    for k in 0..cfg.swarm.size {
        let r = state.agent_position(k) - state.payload_position();
        let swirl = Vector3::new(-r.y, r.x, 0.0) * 0.1 + Vector3::new(0.0, 0.0, 0.2);
        state.set_agent_velocity(k, &swirl);
    }
    (cfg, state)
}

/// Integrates the bare model with zero inputs, repairing the body axes once
/// per control period as a mission does.
fn evolve(cfg: &SimConfig, mut state: SystemState, duration: f64, mut probe: impl FnMut(&SystemState)) {
    let mut model = Model::new(cfg);
    let mut integrator = Integrator::from_config(&cfg.integrator, state.values.len());
    let tick = cfg.controller.period;
    let ticks = (duration / tick).round() as usize;
    for i in 0..ticks {
        let t = i as f64 * tick;
        integrator.advance(&mut model, t, &mut state.values, t + tick).unwrap();
        state.time = t + tick;
        let axes = orthonormalize(&state.axes()).unwrap();
        state.set_axes(&axes);
        probe(&state);
    }
}

#[test]
fn conservative_swarm_keeps_its_energy() {
    let (cfg, state) = free_space();
    let e0 = mechanical_energy(&cfg, &state);
    let mut worst = 0.0f64;
    evolve(&cfg, state, 10.0, |s| {
        worst = worst.max((mechanical_energy(&cfg, s) - e0).abs() / e0);
    });
    assert!(worst < 1e-3, "relative energy drift {worst:e}");
}

#[test]
fn free_swarm_keeps_its_momentum() {
    let (cfg, state) = free_space();
    let p0 = linear_momentum(&cfg, &state);
    let mut worst = 0.0f64;
    evolve(&cfg, state, 10.0, |s| {
        worst = worst.max((linear_momentum(&cfg, s) - p0).norm() / p0.norm());
    });
    assert!(worst < 1e-9, "relative momentum drift {worst:e}");
}

#[test]
fn dissipation_only_removes_energy() {
    let (mut cfg, state) = free_space();
    cfg.cable.damping = SimConfig::baseline().cable.damping;
    cfg.environment.drag = 0.5;
    let mut last = mechanical_energy(&cfg, &state);
    evolve(&cfg, state, 2.0, |s| {
        let e = mechanical_energy(&cfg, s);
        assert!(e <= last * (1.0 + 1e-6), "energy rose from {last} to {e}");
        last = e;
    });
}

fn csv_bytes(cfg: &SimConfig) -> Vec<u8> {
    let log = run_scenario(cfg).unwrap();
    assert!(log.max_axes_drift < 1e-6, "axes drift {:e}", log.max_axes_drift);
    let mut out = Vec::new();
    write_time_series(&mut out, &log).unwrap();
    out
}

#[test]
fn fixed_step_runs_are_bit_identical() {
    let mut cfg = SimConfig::case1();
    cfg.integrator.mode = IntegratorMode::Fixed;
    cfg.scenario.total_time = 3.0;
    let first = csv_bytes(&cfg);
    assert!(first.len() > 1000);
    assert_eq!(first, csv_bytes(&cfg));
}
