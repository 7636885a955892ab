//! `cableswarm` — run missions, check equilibria and stability, recompute metrics.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! failure, 3 a check did not pass.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use cableswarm::analysis::equilibrium::{verify_equilibrium, EquilibriumError, EquilibriumReport};
use cableswarm::analysis::metrics::{compute_mission_metrics, judge, MissionMetrics, Tolerances, Verdicts};
use cableswarm::analysis::stability::{
    analytic_stability_roots, hover_gamma, measure_disturbance_decay, Channel, StabilityError, StabilityReport,
    Verdict,
};
use cableswarm::config::IntegratorMode;
use cableswarm::engine::{SimError, Simulation};
use cableswarm::output::{self, RunSummary};
use cableswarm::{SimConfig, TimeSeriesLog};
use nalgebra::Vector3;

/// Hover checks: cable tilt, elongation band, terminal spin, lift balance.
const HOVER_MAX_ANGLE_DEG: f64 = 1.0;
const HOVER_ELONGATION_BAND: f64 = 0.05;
const HOVER_MAX_SPIN: f64 = 1e-3;
const HOVER_LIFT_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "cableswarm", version, about = "Swarm transport of a cable-slung payload")]
struct Cli {
    /// TOML configuration; defaults to the subcommand's preset
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the time series, summary and figure extracts
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Use fixed-step RK4 instead of the adaptive integrator
    #[arg(long, global = true)]
    fixed_step: bool,
    /// Override the simulated duration (s)
    #[arg(long, global = true)]
    total_time: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configuration given with --config
    Run {
        /// Run twice and require byte-identical time series
        #[arg(long)]
        seed_check: bool,
    },
    /// Simulate a built-in mission
    Scenario {
        #[arg(value_parser = ["case1", "case2", "case3", "hover"])]
        name: String,
        #[arg(long)]
        seed_check: bool,
    },
    /// Simulate a hover and check static balance of the final state
    VerifyEquilibrium,
    /// Analytic roots of the linearized hover plus a simulated disturbance
    Stability {
        /// Agent to displace (1-based)
        #[arg(long, default_value_t = 1)]
        agent: usize,
        /// Displacement x,y,z (m)
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.05, 0.0, 0.0], allow_negative_numbers = true)]
        perturbation: Vec<f64>,
        /// Simulated time (s); defaults to four predicted e-folding times
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Recompute mission metrics from a run directory
    Metrics {
        /// Directory holding timeseries.csv (and summary.json)
        run_dir: PathBuf,
    },
}

/// Error carrying the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }

    fn sim(error: SimError) -> Self {
        Failure {
            code: error.exit_code() as u8,
            error: error.into(),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Run { seed_check } => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Failure::config(anyhow!("`run` needs --config <FILE>")))?;
            let cfg = load_config(cli, None)?;
            let name = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            mission(cli, &cfg, &name, *seed_check)
        }
        Command::Scenario { name, seed_check } => {
            let cfg = load_config(cli, Some(name))?;
            mission(cli, &cfg, name, *seed_check)
        }
        Command::VerifyEquilibrium => {
            let cfg = load_config(cli, Some("hover"))?;
            equilibrium(cli, &cfg)
        }
        Command::Stability {
            agent,
            perturbation,
            duration,
        } => {
            let cfg = load_config(cli, Some("hover"))?;
            stability(cli, &cfg, *agent, perturbation, *duration)
        }
        Command::Metrics { run_dir } => metrics(cli, run_dir),
    }
}

fn load_config(cli: &Cli, preset: Option<&str>) -> Result<SimConfig, Failure> {
    let mut cfg = match (&cli.config, preset) {
        (Some(path), _) => SimConfig::load(path).map_err(Failure::config)?,
        (None, Some(name)) => SimConfig::preset(name).ok_or_else(|| Failure::config(anyhow!("unknown preset {name}")))?,
        (None, None) => return Err(Failure::config(anyhow!("no configuration given"))),
    };
    if cli.fixed_step {
        cfg.integrator.mode = IntegratorMode::Fixed;
    }
    if let Some(t) = cli.total_time {
        cfg.scenario.total_time = t;
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn simulate(cfg: &SimConfig) -> Result<(Simulation, TimeSeriesLog), Failure> {
    let mut sim = Simulation::new(cfg).map_err(Failure::sim)?;
    let log = sim.run().map_err(Failure::sim)?;
    Ok((sim, log))
}

fn time_series_bytes(log: &TimeSeriesLog) -> Vec<u8> {
    let mut buf = Vec::new();
    output::write_time_series(&mut buf, log).expect("writing to memory cannot fail");
    buf
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_verdict(label: &str, verdict: Option<bool>, detail: String) {
    if let Some(pass) = verdict {
        println!("  [{}] {label}: {detail}", mark(pass));
    }
}

fn print_metrics(m: &MissionMetrics, v: &Verdicts, tol: &Tolerances) {
    let p = m.terminal_payload_position;
    println!("  terminal payload position: ({:.4}, {:.4}, {:.4}) m", p[0], p[1], p[2]);
    print_verdict(
        "horizontal error",
        v.horizontal,
        format!("{:.4} m (< {} m)", m.horizontal_error, tol.horizontal),
    );
    if v.horizontal.is_some() {
        println!("  vertical error (anchor plane): {:.4} m", m.vertical_error);
    }
    print_verdict(
        "azimuth",
        v.azimuth,
        format!("{:.3}°, error {:.3}° (< {}°)", m.terminal_azimuth_deg, m.azimuth_error_deg, tol.angle_deg),
    );
    print_verdict(
        "elevation",
        v.elevation,
        format!("{:.3}°, error {:.3}° (< {}°)", m.terminal_elevation_deg, m.elevation_error_deg, tol.angle_deg),
    );
    print_verdict(
        "terminal |ω|",
        Some(v.terminal_spin),
        format!("{:.3e} rad/s (< {}), peak {:.3e}", m.terminal_spin, tol.spin, m.peak_spin),
    );
    if let Some(d) = m.min_obstacle_distance {
        print_verdict("obstacle clearance", v.obstacle_clearance, format!("{d:.3} m (> {} m)", tol.clearance));
    }
    if v.spin_recovery.is_some() {
        let detail = m
            .spin_recovery_time
            .map_or("still spinning at the end".into(), |t| format!("{t:.2} s after the wind (≤ {} s)", tol.recovery));
        print_verdict("spin recovery", v.spin_recovery, detail);
    }
    if v.failed_agent_passive.is_some() {
        print_verdict(
            "failed agent passive",
            v.failed_agent_passive,
            format!(
                "max |u| after failure {:e} N, terminal tension {:.3} N",
                m.failed_agent_max_control.unwrap_or(f64::NAN),
                m.failed_agent_terminal_tension.unwrap_or(f64::NAN)
            ),
        );
    }
    if let Some(d) = m.min_agent_distance {
        println!("  min inter-agent distance: {d:.3} m");
    }
    if let Some(t) = m.settle_time {
        println!("  settled horizontally at: {t:.2} s");
    }
}

fn mission(cli: &Cli, cfg: &SimConfig, name: &str, seed_check: bool) -> Outcome {
    let started = std::time::Instant::now();
    let (_, log) = simulate(cfg)?;
    println!(
        "{name}: {:.1} s simulated in {:.2?}, {} samples",
        cfg.scenario.total_time,
        started.elapsed(),
        log.samples.len()
    );

    let metrics = compute_mission_metrics(&log, cfg);
    let verdicts = judge(&metrics, cfg);
    let tolerances = Tolerances::for_config(cfg);
    print_metrics(&metrics, &verdicts, &tolerances);
    let mut passed = verdicts.all_pass();

    if seed_check {
        let (_, again) = simulate(cfg)?;
        let (a, b) = (time_series_bytes(&log), time_series_bytes(&again));
        let same = a == b && log.events == again.events;
        println!("  [{}] seed check: {} bytes, second run {}", mark(same), a.len(), if same { "identical" } else { "differs" });
        passed &= same;
    }

    if let Some(dir) = &cli.out_dir {
        let summary = RunSummary {
            passed,
            verdicts,
            tolerances,
            metrics: &metrics,
            events: &log.events,
            max_axes_drift: log.max_axes_drift,
            config: cfg,
        };
        let files = output::emit_outputs(dir, &log, &summary).map_err(Failure::config)?;
        println!("  wrote {} files to {}", files.len(), dir.display());
    }
    println!("{}", if passed { "all checks passed" } else { "some checks FAILED" });
    Ok(passed)
}

fn equilibrium(cli: &Cli, cfg: &SimConfig) -> Outcome {
    let (sim, log) = simulate(cfg)?;
    let report = match verify_equilibrium(cfg, &sim.state, &sim.model.controls) {
        Ok(r) => r,
        Err(EquilibriumError::NotSteady { max_speed, angular_speed }) => {
            println!("state at t = {:.2} s is not steady: node speed {max_speed:e} m/s, spin {angular_speed:e} rad/s", sim.state.time);
            return Ok(false);
        }
        Err(e) => return Err(Failure::config(e)),
    };
    let spin = log.samples.last().map_or(0.0, |s| Vector3::from(s.angular_velocity).norm());
    let passed = print_equilibrium(&report, spin);
    if let Some(dir) = &cli.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::config)?;
        let path = dir.join("equilibrium.json");
        output::write_json(&path, &report).map_err(Failure::config)?;
        println!("  wrote {}", path.display());
    }
    Ok(passed)
}

fn print_equilibrium(r: &EquilibriumReport, spin: f64) -> bool {
    println!("equilibrium at t = {:.2} s", r.time);
    let angle = r.max_cable_angle_deg() < HOVER_MAX_ANGLE_DEG;
    let stretch = r.max_relative_elongation_error() < HOVER_ELONGATION_BAND;
    let spin_ok = spin < HOVER_MAX_SPIN;
    let lift = r.lift_residual.iter().all(|v| v.abs() < HOVER_LIFT_TOLERANCE);
    println!("  [{}] max cable tilt: {:.3e}° (< {HOVER_MAX_ANGLE_DEG}°)", mark(angle), r.max_cable_angle_deg());
    println!(
        "  [{}] elongation: expected {:.6} m, worst relative error {:.3e} (< {HOVER_ELONGATION_BAND})",
        mark(stretch),
        r.expected_elongation,
        r.max_relative_elongation_error()
    );
    println!("  [{}] terminal |ω|: {spin:.3e} rad/s (< {HOVER_MAX_SPIN})", mark(spin_ok));
    println!(
        "  [{}] lift {:.6} N vs weight {:.6} N, residual per agent {:.3e} N",
        mark(lift),
        r.total_lift[2],
        r.total_weight,
        r.lift_residual_per_agent
    );
    println!("  moment residual: {:.3e} N·m", r.moment_residual);
    println!("  largest node residual: {:.3e} N", r.max_node_residual);
    angle && stretch && spin_ok && lift
}

fn stability(cli: &Cli, cfg: &SimConfig, agent: usize, perturbation: &[f64], duration: Option<f64>) -> Outcome {
    let stab_err = |e: StabilityError| match e {
        StabilityError::Simulation(s) => Failure::sim(s),
        other => Failure::config(other),
    };
    if agent == 0 {
        return Err(Failure::config(anyhow!("agents are numbered from 1")));
    }
    let analytic = analytic_stability_roots(cfg, hover_gamma(cfg)).map_err(stab_err)?;
    let duration = duration.unwrap_or(4.0 / analytic.predicted_dominant_decay);
    let delta = Vector3::new(perturbation[0], perturbation[1], perturbation[2]);
    let report = measure_disturbance_decay(cfg, agent - 1, delta, duration).map_err(stab_err)?;
    let passed = print_stability(&report, duration);
    if let Some(dir) = &cli.out_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::config)?;
        let path = dir.join("stability.json");
        output::write_json(&path, &report).map_err(Failure::config)?;
        println!("  wrote {}", path.display());
    }
    Ok(passed)
}

fn print_stability(r: &StabilityReport, duration: f64) -> bool {
    println!("linearized hover, γ = {:.6} m, k_eff = {:.4} N/m", r.gamma, r.effective_stiffness);
    for (label, roots) in [("lateral", &r.lateral_roots), ("vertical", &r.vertical_roots)] {
        println!(
            "  {label} roots: {:.5} ± {:.5}i",
            roots[0].re,
            roots[0].im.abs()
        );
    }
    println!("  [{}] all roots in the left half-plane", mark(r.all_roots_stable()));
    if let (Some(channel), Some(fit)) = (r.channel, r.simulated_decay) {
        let predicted = r.channel_decay(channel);
        let name = match channel {
            Channel::Lateral => "lateral",
            Channel::Vertical => "vertical",
        };
        println!(
            "  [{}] {name} decay over {duration:.1} s: simulated {fit:.5} 1/s, predicted {predicted:.5} 1/s, error {:.1}%",
            mark(r.verdict == Verdict::Consistent),
            100.0 * r.decay_error().unwrap_or(f64::NAN)
        );
    } else if r.peak_response == Some(0.0) {
        println!("  zero perturbation: no response");
        return r.all_roots_stable();
    } else {
        println!("  [FAIL] simulated response did not decay");
    }
    r.verdict == Verdict::Consistent
}

fn metrics(cli: &Cli, run_dir: &Path) -> Outcome {
    let log = output::read_run_dir(run_dir).map_err(Failure::config)?;
    let summary_path = run_dir.join(output::SUMMARY_FILE);
    let summary: Option<serde_json::Value> = match std::fs::read_to_string(&summary_path) {
        Ok(text) => Some(
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", summary_path.display()))
                .map_err(Failure::config)?,
        ),
        Err(_) => None,
    };
    let cfg = match (&cli.config, &summary) {
        (Some(_), _) => load_config(cli, None)?,
        (None, Some(s)) => serde_json::from_value::<SimConfig>(s["config"].clone())
            .with_context(|| format!("configuration echo in {}", summary_path.display()))
            .map_err(Failure::config)?,
        (None, None) => return Err(Failure::config(anyhow!("no summary.json in {}; pass --config", run_dir.display()))),
    };
    let m = compute_mission_metrics(&log, &cfg);
    let v = judge(&m, &cfg);
    println!("{}: {} samples", run_dir.display(), log.samples.len());
    print_metrics(&m, &v, &Tolerances::for_config(&cfg));
    let mut passed = v.all_pass();
    if let Some(s) = &summary {
        let recomputed = serde_json::to_value(&m).map_err(Failure::config)?;
        let same = s["metrics"] == recomputed;
        println!("  [{}] recomputed metrics match summary.json", mark(same));
        passed &= same;
    }
    Ok(passed)
}
