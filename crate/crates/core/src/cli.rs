//! `swarmform` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::anneal::{anneal_beta, AnnealConfig};
use crate::error::Error;
use crate::io::{
    self, metric_series, metrics_csv, parse_config, parse_events, series_csv, trajectory_csv, FileDigest, LogHeader,
    RunManifest,
};
use crate::shape::{discretize_polygon, format_points, load_points, load_polygon, validate_density, SamplePointSet};
use crate::sim::{run, EventSchedule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "swarmform", version, about = "Meanshift shape formation for robot swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, metrics and manifest files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Sample-point file.
        #[arg(long)]
        shape: PathBuf,
        /// Source polygon of the sample points, used for inside-the-shape tests.
        #[arg(long)]
        outline: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Feed true masses to the controllers.
        #[arg(long)]
        oracle_mass: bool,
        /// Fail when gamma is below the estimator bound.
        #[arg(long)]
        strict_gamma: bool,
    },
    /// Select the kernel bandwidth by deterministic annealing.
    Anneal {
        #[arg(long)]
        shape: PathBuf,
        #[arg(long)]
        robots: usize,
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        #[arg(long, default_value_t = 0.01)]
        beta_initial: f64,
        #[arg(long, default_value_t = 150.0)]
        beta_final: f64,
        #[arg(long, default_value_t = 1.025)]
        cooling: f64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the annealed robot positions.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discretize a polygon into a sample-point file.
    Shapegen {
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
        /// Report the density conditions for this many robots.
        #[arg(long)]
        robots: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        r_avoid: f64,
    },
    /// Extract one metric as a two-column series.
    Plotdata {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, value_enum)]
        kind: MetricKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricKind {
    #[value(name = "F")]
    F,
    #[value(name = "E_est")]
    EEst,
    #[value(name = "M_uni")]
    MUni,
    #[value(name = "M_cover")]
    MCover,
}

impl MetricKind {
    fn column(self) -> &'static str {
        match self {
            MetricKind::F => "F",
            MetricKind::EEst => "E_est",
            MetricKind::MUni => "M_uni",
            MetricKind::MCover => "M_cover",
        }
    }
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: i32,
    error: Error,
}

fn usage(error: Error) -> Failure {
    Failure { code: EXIT_USAGE, error }
}

fn runtime(error: Error) -> Failure {
    Failure { code: EXIT_RUNTIME, error }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            config,
            shape,
            outline,
            events,
            out,
            seed,
            oracle_mass,
            strict_gamma,
        } => cmd_run(&config, &shape, outline.as_deref(), events.as_deref(), &out, seed, oracle_mass, strict_gamma),
        Command::Anneal {
            shape,
            robots,
            d_min,
            beta_initial,
            beta_final,
            cooling,
            tolerance,
            seed,
            out,
        } => {
            let cfg = AnnealConfig {
                beta_initial,
                beta_final,
                cooling,
                tolerance,
                d_min,
                seed,
                ..Default::default()
            };
            cmd_anneal(&shape, robots, &cfg, out.as_deref())
        }
        Command::Shapegen {
            polygon,
            spacing,
            out,
            robots,
            r_avoid,
        } => cmd_shapegen(&polygon, spacing, &out, robots, r_avoid),
        Command::Plotdata { metrics, kind, out } => cmd_plotdata(&metrics, kind, &out),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| runtime(Error::io(path, e)))
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn digest(path: &Path) -> Result<FileDigest, Failure> {
    let mut d = FileDigest::of(path).map_err(usage)?;
    d.path = absolute(path).display().to_string();
    Ok(d)
}

fn load_shape(shape: &Path, outline: Option<&Path>) -> crate::error::Result<SamplePointSet> {
    let set = load_points(shape)?;
    match outline {
        None => Ok(set),
        Some(p) => SamplePointSet::new(set.points().clone(), set.spacing(), Some(load_polygon(p)?)),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config_path: &Path,
    shape_path: &Path,
    outline: Option<&Path>,
    events_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    oracle_mass: bool,
    strict_gamma: bool,
) -> Result<(), Failure> {
    let config_bytes = io::read_file(config_path).map_err(usage)?;
    let config_text = String::from_utf8(config_bytes.clone())
        .map_err(|_| usage(Error::Config(format!("{} is not UTF-8", config_path.display()))))?;
    let mut config = parse_config(&config_text).map_err(usage)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.oracle_mass |= oracle_mass;
    config.strict_gamma |= strict_gamma;
    config.validate().map_err(usage)?;
    config.check_gamma(config.robots).map_err(usage)?;

    let shape = load_shape(shape_path, outline).map_err(usage)?;
    if shape.dim() != config.dim {
        return Err(usage(Error::Config(format!(
            "shape file is {}-D but dim = {}",
            shape.dim(),
            config.dim
        ))));
    }
    let events = match events_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(Error::io(p, e)))?;
            parse_events(&text, config.dim).map_err(usage)?
        }
        None => EventSchedule::default(),
    };

    let output = run(&config, &shape, &events).map_err(runtime)?;

    fs::create_dir_all(out).map_err(|e| runtime(Error::io(out, e)))?;
    let header = LogHeader {
        config_sha256: io::sha256_hex(&config_bytes),
        seed: config.seed,
    };
    let traj_path = out.join(io::TRAJECTORY_FILE);
    let metrics_path = out.join(io::METRICS_FILE);
    write(&traj_path, &trajectory_csv(&header, &output.frames))?;
    write(&metrics_path, &metrics_csv(&header, &output.metrics))?;

    let output_digest = |p: &Path, name: &str| -> Result<FileDigest, Failure> {
        let mut d = FileDigest::of(p).map_err(runtime)?;
        d.path = name.to_string();
        Ok(d)
    };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: digest(config_path)?,
        shape: digest(shape_path)?,
        events: events_path.map(digest).transpose()?,
        seed: config.seed,
        oracle_mass: config.oracle_mass,
        coverage_pitch: shape.spacing() / 4.0,
        first_record_t: output.metrics.first().map_or(0.0, |r| r.t),
        last_record_t: output.metrics.last().map_or(0.0, |r| r.t),
        records: output.metrics.len(),
        t_conv: output.t_conv(),
        outputs: vec![
            output_digest(&traj_path, io::TRAJECTORY_FILE)?,
            output_digest(&metrics_path, io::METRICS_FILE)?,
        ],
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&out.join(io::MANIFEST_FILE), &(json + "\n"))?;

    if let Some(last) = output.metrics.last() {
        println!(
            "t = {} s, n = {}, F = {:.6}, E_est = {:.3e}, M_cover = {:.2}%, T_conv = {}",
            last.t,
            last.n,
            last.f,
            last.e_est,
            last.m_cover,
            manifest.t_conv.map_or("none".to_string(), |t| format!("{t} s"))
        );
    }
    Ok(())
}

fn cmd_anneal(shape_path: &Path, robots: usize, config: &AnnealConfig, out: Option<&Path>) -> Result<(), Failure> {
    config.validate().map_err(usage)?;
    if robots == 0 {
        return Err(usage(Error::NoRobots));
    }
    let shape = load_points(shape_path).map_err(usage)?;
    let outcome = anneal_beta(&shape, robots, config).map_err(runtime)?;
    println!("{:.16e}", outcome.beta);
    eprintln!(
        "rounds = {}, min pairwise distance = {:.6}{}",
        outcome.rounds,
        outcome.min_distance,
        if outcome.exhausted { ", schedule exhausted" } else { "" }
    );
    if let Some(path) = out {
        write(path, &format_points(&outcome.positions))?;
    }
    Ok(())
}

fn cmd_shapegen(polygon: &Path, spacing: f64, out: &Path, robots: Option<usize>, r_avoid: f64) -> Result<(), Failure> {
    let poly = load_polygon(polygon).map_err(usage)?;
    let set = discretize_polygon(&poly, spacing).map_err(usage)?;
    write(out, &format_points(set.points()))?;
    println!("m = {}, d_pts = {}", set.len(), set.spacing());
    if let Some(n) = robots {
        if n == 0 {
            return Err(usage(Error::NoRobots));
        }
        println!("{}", validate_density(&set, n, r_avoid));
    }
    Ok(())
}

fn cmd_plotdata(metrics: &Path, kind: MetricKind, out: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(metrics).map_err(|e| usage(Error::io(metrics, e)))?;
    let series = metric_series(&text, kind.column()).map_err(usage)?;
    write(out, &series_csv(kind.column(), &series))
}
