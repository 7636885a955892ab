//! Files written by a run.
//!
//! `timeseries.csv` holds one row per logged sample with a fixed column
//! order, time first:
//!
//! ```text
//! time,
//! payload_x, payload_y, payload_z, payload_vx, payload_vy, payload_vz,
//! omega_x, omega_y, omega_z, azimuth_deg, elevation_deg,
//! centroid_x, centroid_y, centroid_z, center_x, center_y, center_z,
//! wind_active,
//! then per agent k = 1..n: agent{k}_x, agent{k}_y, agent{k}_z,
//!                          u{k}_x, u{k}_y, u{k}_z, tension{k}
//! ```
//!
//! Floats are written in shortest round-trip form, so reading the file
//! back reproduces the log bit for bit. `events.csv` lists `time,kind`
//! markers, `summary.json` the metrics, verdicts and an echo of the
//! configuration, and `figures/` one small CSV per plotted quantity.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::metrics::{MissionMetrics, Tolerances, Verdicts};
use crate::config::SimConfig;
use crate::engine::{LogEvent, LogSample, TimeSeriesLog};

pub const TIME_SERIES_FILE: &str = "timeseries.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FIGURES_DIR: &str = "figures";

const FIXED_COLUMNS: [&str; 19] = [
    "time",
    "payload_x",
    "payload_y",
    "payload_z",
    "payload_vx",
    "payload_vy",
    "payload_vz",
    "omega_x",
    "omega_y",
    "omega_z",
    "azimuth_deg",
    "elevation_deg",
    "centroid_x",
    "centroid_y",
    "centroid_z",
    "center_x",
    "center_y",
    "center_z",
    "wind_active",
];
const PER_AGENT: usize = 7;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}, record {record}: {message}")]
    Format {
        path: PathBuf,
        record: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn time_series_header(agents: usize) -> Vec<String> {
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for k in 1..=agents {
        for c in ["x", "y", "z"] {
            header.push(format!("agent{k}_{c}"));
        }
        for c in ["x", "y", "z"] {
            header.push(format!("u{k}_{c}"));
        }
        header.push(format!("tension{k}"));
    }
    header
}

fn sample_record(s: &LogSample) -> Vec<String> {
    let mut row = Vec::with_capacity(FIXED_COLUMNS.len() + PER_AGENT * s.agent_positions.len());
    row.push(s.time.to_string());
    for v in [s.payload_position, s.payload_velocity, s.angular_velocity] {
        row.extend(v.iter().map(f64::to_string));
    }
    row.push(s.azimuth.to_string());
    row.push(s.elevation.to_string());
    for v in [s.anchor_centroid, s.swarm_center] {
        row.extend(v.iter().map(f64::to_string));
    }
    row.push(u8::from(s.wind_active).to_string());
    for ((p, u), t) in s.agent_positions.iter().zip(&s.controls).zip(&s.anchor_tensions) {
        row.extend(p.iter().map(f64::to_string));
        row.extend(u.iter().map(f64::to_string));
        row.push(t.to_string());
    }
    row
}

pub fn write_time_series<W: Write>(out: W, log: &TimeSeriesLog) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(time_series_header(log.agents))?;
    for s in &log.samples {
        w.write_record(sample_record(s))?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a time series written by [`write_time_series`]. `path` is only
/// used in error messages. Events and axis drift are not part of the file.
pub fn read_time_series<R: Read>(input: R, path: &Path) -> Result<TimeSeriesLog, OutputError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err(path))?.clone();
    let format = |record: usize, message: String| OutputError::Format {
        path: path.to_path_buf(),
        record,
        message,
    };
    let extra = header.len().checked_sub(FIXED_COLUMNS.len()).unwrap_or(usize::MAX);
    if extra == usize::MAX || extra % PER_AGENT != 0 {
        return Err(format(0, format!("unexpected column count {}", header.len())));
    }
    let agents = extra / PER_AGENT;
    let expected = time_series_header(agents);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format(0, "header does not match the time-series layout".into()));
    }

    let mut samples = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let line = i + 1;
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format(line, e.to_string()))?;
        let v3 = |at: usize| [values[at], values[at + 1], values[at + 2]];
        let base = FIXED_COLUMNS.len();
        samples.push(LogSample {
            time: values[0],
            payload_position: v3(1),
            payload_velocity: v3(4),
            angular_velocity: v3(7),
            azimuth: values[10],
            elevation: values[11],
            anchor_centroid: v3(12),
            swarm_center: v3(15),
            wind_active: values[18] != 0.0,
            agent_positions: (0..agents).map(|k| v3(base + PER_AGENT * k)).collect(),
            controls: (0..agents).map(|k| v3(base + PER_AGENT * k + 3)).collect(),
            anchor_tensions: (0..agents).map(|k| values[base + PER_AGENT * k + 6]).collect(),
        });
    }
    Ok(TimeSeriesLog {
        agents,
        samples,
        events: Vec::new(),
        max_axes_drift: 0.0,
    })
}

pub fn write_events<W: Write>(out: W, events: &[LogEvent]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "kind"])?;
    for e in events {
        w.write_record([e.time.to_string(), e.kind.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(input: R, path: &Path) -> Result<Vec<LogEvent>, OutputError> {
    let mut r = csv::Reader::from_reader(input);
    let mut events = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let bad = |message: String| OutputError::Format {
            path: path.to_path_buf(),
            record: i + 1,
            message,
        };
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", record.len())));
        }
        events.push(LogEvent {
            time: record[0].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            kind: record[1].to_string(),
        });
    }
    Ok(events)
}

/// Reads `timeseries.csv` and, when present, `events.csv` from `dir`.
pub fn read_run_dir(dir: &Path) -> Result<TimeSeriesLog, OutputError> {
    let path = dir.join(TIME_SERIES_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut log = read_time_series(file, &path)?;
    let events_path = dir.join(EVENTS_FILE);
    if events_path.exists() {
        let file = File::open(&events_path).map_err(io_err(&events_path))?;
        log.events = read_events(file, &events_path)?;
    }
    Ok(log)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub passed: bool,
    pub verdicts: Verdicts,
    pub tolerances: Tolerances,
    pub metrics: &'a MissionMetrics,
    pub events: &'a [LogEvent],
    /// Largest ‖BᵀB − I‖ before re-orthonormalization.
    pub max_axes_drift: f64,
    pub config: &'a SimConfig,
}

fn write_csv_file(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn strings<const N: usize>(values: [f64; N]) -> Vec<String> {
    values.iter().map(f64::to_string).collect()
}

/// Plot-ready extracts: payload position, attitude, angular velocity,
/// agent trajectories (long format) and event markers.
pub fn write_figure_extracts(dir: &Path, log: &TimeSeriesLog) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let s = &log.samples;
    let mut written = Vec::new();

    let path = dir.join("payload_position.csv");
    write_csv_file(
        &path,
        &["time", "x", "y", "z", "centroid_x", "centroid_y", "centroid_z"],
        s.iter().map(|s| {
            let (p, c) = (s.payload_position, s.anchor_centroid);
            strings([s.time, p[0], p[1], p[2], c[0], c[1], c[2]])
        }),
    )?;
    written.push(path);

    let path = dir.join("attitude.csv");
    write_csv_file(
        &path,
        &["time", "azimuth_deg", "elevation_deg"],
        s.iter().map(|s| strings([s.time, s.azimuth, s.elevation])),
    )?;
    written.push(path);

    let path = dir.join("angular_velocity.csv");
    write_csv_file(
        &path,
        &["time", "omega_x", "omega_y", "omega_z", "omega_norm", "wind_active"],
        s.iter().map(|s| {
            let w = s.angular_velocity;
            let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            let mut row = strings([s.time, w[0], w[1], w[2], norm]);
            row.push(u8::from(s.wind_active).to_string());
            row
        }),
    )?;
    written.push(path);

    let path = dir.join("agent_trajectories.csv");
    write_csv_file(
        &path,
        &["time", "agent", "x", "y", "z"],
        s.iter().flat_map(|s| {
            s.agent_positions.iter().enumerate().map(move |(k, p)| {
                vec![
                    s.time.to_string(),
                    (k + 1).to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                    p[2].to_string(),
                ]
            })
        }),
    )?;
    written.push(path);

    let path = dir.join(EVENTS_FILE);
    write_csv_file(
        &path,
        &["time", "kind"],
        log.events.iter().map(|e| vec![e.time.to_string(), e.kind.clone()]),
    )?;
    written.push(path);
    Ok(written)
}

/// Writes the time series, events, summary and figure extracts into `dir`.
pub fn emit_outputs(dir: &Path, log: &TimeSeriesLog, summary: &RunSummary<'_>) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join(TIME_SERIES_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    write_time_series(BufWriter::new(file), log).map_err(csv_err(&path))?;
    written.push(path);

    let path = dir.join(EVENTS_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    write_events(BufWriter::new(file), &log.events).map_err(csv_err(&path))?;
    written.push(path);

    let path = dir.join(SUMMARY_FILE);
    write_json(&path, summary)?;
    written.push(path);

    written.extend(write_figure_extracts(&dir.join(FIGURES_DIR), log)?);
    Ok(written)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}
