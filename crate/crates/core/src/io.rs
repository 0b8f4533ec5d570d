//! File formats: scenario config, event schedules, trajectory and metrics
//! logs, and the run manifest.
//!
//! Every float is written with 17 significant digits so logs round-trip.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Points;
use crate::metrics::Frame;
use crate::sim::{EventAction, EventSchedule, MetricsRecord, ScheduledEvent, SimConfig};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses a flat `key = value` config; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
}

pub fn format_config(config: &SimConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

/// One event per line: `t add x,y[;x,y...]`, `t add random k` or
/// `t remove id[,id...]`. `#` starts a comment line.
pub fn parse_events(text: &str, dim: usize) -> Result<EventSchedule> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let mut parts = line.split_whitespace();
        let (Some(t), Some(verb)) = (parts.next(), parts.next()) else {
            return Err(err(format!("expected `<time> <add|remove> ...`, got {line:?}")));
        };
        let time: f64 = t.parse().map_err(|_| err(format!("malformed time {t:?}")))?;
        let rest: Vec<&str> = parts.collect();
        let action = match (verb, rest.as_slice()) {
            ("add", ["random", k]) => {
                let k: usize = k.parse().map_err(|_| err(format!("malformed robot count {k:?}")))?;
                EventAction::AddRandom(k)
            }
            ("add", [list]) => {
                let mut pts = Points::with_capacity(dim, 1);
                for point in list.split(';').filter(|s| !s.is_empty()) {
                    let row = point
                        .split(',')
                        .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| err(format!("malformed position {point:?}")))?;
                    pts.push(&row).map_err(|e| err(e.to_string()))?;
                }
                EventAction::AddAt(pts)
            }
            ("remove", [list]) => {
                let ids = list
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err(format!("malformed robot id list {list:?}")))?;
                EventAction::Remove(ids)
            }
            _ => return Err(err(format!("unrecognized event {line:?}"))),
        };
        events.push(ScheduledEvent { time, action });
    }
    EventSchedule::new(events)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(header: &LogHeader, frames: &[Frame]) -> String {
    let mut out = header.render("trajectory");
    let dim = frames.first().map_or(0, |f| f.positions.dim());
    let mut cols = vec!["t".to_string(), "id".to_string()];
    cols.extend((0..dim).map(|c| format!("p{c}")));
    cols.extend((0..dim).map(|c| format!("v{c}")));
    out.push_str(&cols.join(","));
    out.push('\n');
    for f in frames {
        for (i, id) in f.ids.iter().enumerate() {
            let _ = write!(out, "{},{id}", fmt_f(f.t));
            for c in f.positions.get(i).iter().chain(f.velocities.get(i)) {
                let _ = write!(out, ",{}", fmt_f(*c));
            }
            out.push('\n');
        }
    }
    out
}

pub const METRIC_COLUMNS: [&str; 14] = [
    "t", "n", "provisional", "F", "F_max", "F_uni", "F_est", "F_max_est", "F_uni_est", "E_est", "M_uni",
    "M_cover", "connected", "min_distance",
];

pub fn metrics_csv(header: &LogHeader, records: &[MetricsRecord]) -> String {
    let mut out = header.render("metrics");
    out.push_str(&METRIC_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        let floats = [r.f, r.f_max, r.f_uni, r.f_est, r.f_max_est, r.f_uni_est, r.e_est, r.m_uni, r.m_cover];
        let _ = write!(out, "{},{},{}", fmt_f(r.t), r.n, r.provisional as u8);
        for x in floats {
            let _ = write!(out, ",{}", fmt_f(x));
        }
        let _ = writeln!(out, ",{},{}", r.connected as u8, fmt_f(r.min_distance));
    }
    out
}

/// Identification lines written at the top of every log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHeader {
    pub config_sha256: String,
    pub seed: u64,
}

impl LogHeader {
    fn render(&self, kind: &str) -> String {
        format!(
            "# swarmform {kind} v1\n# config_sha256={} seed={}\n",
            self.config_sha256, self.seed
        )
    }
}

/// Extracts the `(t, value)` series of one metric column from a metrics log.
pub fn metric_series(text: &str, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::invalid("metrics log is empty"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let t_col = names
        .iter()
        .position(|&c| c == "t")
        .ok_or_else(|| Error::invalid("metrics log has no `t` column"))?;
    let v_col = names
        .iter()
        .position(|&c| c == column)
        .ok_or_else(|| Error::invalid(format!("metrics log has no {column:?} column")))?;
    let mut series = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let get = |c: usize| -> Result<f64> {
            fields
                .get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: idx + 1,
                    message: format!("missing or malformed field {}", names[c]),
                })
        };
        series.push((get(t_col)?, get(v_col)?));
    }
    if series.is_empty() {
        return Err(Error::invalid("metrics log has no records"));
    }
    Ok(series)
}

pub fn series_csv(column: &str, series: &[(f64, f64)]) -> String {
    let mut out = format!("t,{column}\n");
    for (t, v) in series {
        let _ = writeln!(out, "{},{}", fmt_f(*t), fmt_f(*v));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&read_file(path)?),
        })
    }
}

/// Provenance of one `run` invocation. Holds no timestamps, so identical
/// inputs yield an identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: FileDigest,
    pub shape: FileDigest,
    pub events: Option<FileDigest>,
    pub seed: u64,
    pub oracle_mass: bool,
    pub coverage_pitch: f64,
    pub first_record_t: f64,
    pub last_record_t: f64,
    pub records: usize,
    pub t_conv: Option<f64>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    /// Recomputes every referenced file's hash and compares.
    pub fn verify(&self, base: &Path) -> Result<bool> {
        let mut files: Vec<&FileDigest> = vec![&self.config, &self.shape];
        files.extend(self.events.iter());
        files.extend(self.outputs.iter());
        for f in files {
            let p = Path::new(&f.path);
            let p = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            if sha256_hex(&read_file(&p)?) != f.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
