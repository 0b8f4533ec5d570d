//! C ABI for the `swarmform` shape-formation simulator.
//!
//! Objects cross the boundary as opaque handles created by `sf_*_new` /
//! `sf_shape_*` constructors and released with the matching `*_free`.
//! Every fallible call returns an [`SfStatus`]; on failure the message is
//! available from [`sf_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use swarmform::anneal::{anneal_beta, AnnealConfig};
use swarmform::io::parse_config;
use swarmform::shape::{discretize_polygon, load_points};
use swarmform::sim::{EventAction, SimConfig, Simulation};
use swarmform::{Error, Points, SamplePointSet};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Polygon is degenerate, self-intersecting or yields no points.
    Geometry = 3,
    Parse = 4,
    Config = 5,
    /// A mass or estimate left its domain (e.g. became non-positive).
    Domain = 6,
    UnknownRobot = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Sample-point set handle.
pub struct SfShape {
    inner: SamplePointSet,
}

/// Simulation handle.
pub struct SfSimulation {
    inner: Simulation,
}

/// Evaluation metrics at one instant.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfMetrics {
    pub t: f64,
    pub n: usize,
    pub provisional: bool,
    pub f: f64,
    pub f_max: f64,
    pub f_uni: f64,
    pub f_est: f64,
    pub e_est: f64,
    pub m_uni: f64,
    pub m_cover: f64,
    pub connected: bool,
    pub min_distance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let msg = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DegeneratePolygon | Error::SelfIntersectingPolygon(..) | Error::EmptyDiscretization => {
                SfStatus::Geometry
            }
            Error::Parse { .. } => SfStatus::Parse,
            Error::Config(_) | Error::GammaBelowBound { .. } => SfStatus::Config,
            Error::NonPositiveMass { .. } => SfStatus::Domain,
            Error::UnknownRobot(_) => SfStatus::UnknownRobot,
            Error::Io { .. } => SfStatus::Io,
            _ => SfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SfStatus::NullPointer, format!("{what} is null"))
}

fn guard<F>(body: F) -> SfStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SfStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn output<'a, T>(data: *mut T, capacity: usize, needed: usize) -> Result<&'a mut [T], Failure> {
    if needed == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < needed {
        return Err(Failure(
            SfStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {needed} required"),
        ));
    }
    Ok(slice::from_raw_parts_mut(data, needed))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(SfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Discretizes a simple polygon given as `vertex_count` interleaved `x, y` pairs.
///
/// # Safety
/// `vertices` must point to `2 * vertex_count` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_from_polygon(
    vertices: *const f64,
    vertex_count: usize,
    spacing: f64,
    out: *mut *mut SfShape,
) -> SfStatus {
    guard(|| {
        let flat = input(vertices, 2 * vertex_count, "vertices")?;
        let poly: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        store(out, SfShape { inner: discretize_polygon(&poly, spacing)? })
    })
}

/// Builds a shape from `count` points of dimension `dim`, row-major.
///
/// # Safety
/// `coords` must point to `count * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_from_points(
    coords: *const f64,
    count: usize,
    dim: usize,
    out: *mut *mut SfShape,
) -> SfStatus {
    guard(|| {
        if dim == 0 {
            return Err(Failure(SfStatus::InvalidArgument, "dim must be at least 1".into()));
        }
        let flat = input(coords, count * dim, "coords")?;
        let points = Points::new(dim, flat.to_vec())?;
        let spacing = match points.min_pairwise_distance() {
            d if d.is_finite() => d,
            _ => 1.0,
        };
        store(out, SfShape { inner: SamplePointSet::new(points, spacing, None)? })
    })
}

/// Loads a sample-point file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_load(path: *const c_char, out: *mut *mut SfShape) -> SfStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        store(out, SfShape { inner: load_points(Path::new(path))? })
    })
}

/// Number of sample points; 0 for a null handle.
///
/// # Safety
/// `shape` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_len(shape: *const SfShape) -> usize {
    shape.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `shape` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_dim(shape: *const SfShape) -> usize {
    shape.as_ref().map_or(0, |s| s.inner.dim())
}

/// Inter-point spacing `d_pts`; NaN for a null handle.
///
/// # Safety
/// `shape` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_spacing(shape: *const SfShape) -> f64 {
    shape.as_ref().map_or(f64::NAN, |s| s.inner.spacing())
}

/// Copies the sample points, row-major, into `out` (`len * dim` doubles).
///
/// # Safety
/// `shape` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_points(shape: *const SfShape, out: *mut f64, capacity: usize) -> SfStatus {
    guard(|| {
        let shape = shape.as_ref().ok_or_else(|| null("shape"))?;
        let flat = shape.inner.points().as_flat();
        output(out, capacity, flat.len())?.copy_from_slice(flat);
        Ok(())
    })
}

/// # Safety
/// `shape` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_shape_free(shape: *mut SfShape) {
    if !shape.is_null() {
        drop(Box::from_raw(shape));
    }
}

/// Creates a simulation from a TOML config (null for defaults) and a shape.
/// The shape is copied; the handle may be freed afterwards.
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; `shape` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_new(
    config_toml: *const c_char,
    shape: *const SfShape,
    out: *mut *mut SfSimulation,
) -> SfStatus {
    guard(|| {
        let config = if config_toml.is_null() {
            SimConfig::default()
        } else {
            parse_config(c_str(config_toml, "config")?)?
        };
        let shape = shape.as_ref().ok_or_else(|| null("shape"))?;
        let inner = Simulation::new(config, shape.inner.clone())?;
        store(out, SfSimulation { inner })
    })
}

/// Advances `steps` control periods.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_step(sim: *mut SfSimulation, steps: usize) -> SfStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulation"))?;
        for _ in 0..steps {
            sim.inner.step()?;
        }
        Ok(())
    })
}

/// Simulated time in seconds; NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_time(sim: *const SfSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.inner.state().t)
}

/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_robot_count(sim: *const SfSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.inner.state().n())
}

/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_dim(sim: *const SfSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.inner.config().dim)
}

/// Copies robot positions, row-major (`robot_count * dim` doubles).
///
/// # Safety
/// `sim` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_positions(sim: *const SfSimulation, out: *mut f64, capacity: usize) -> SfStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        let flat = sim.inner.state().positions.as_flat();
        output(out, capacity, flat.len())?.copy_from_slice(flat);
        Ok(())
    })
}

/// Copies the stable robot ids (`robot_count` values).
///
/// # Safety
/// `sim` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_ids(sim: *const SfSimulation, out: *mut u64, capacity: usize) -> SfStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        let ids = &sim.inner.state().ids;
        output(out, capacity, ids.len())?.copy_from_slice(ids);
        Ok(())
    })
}

/// Evaluates the metrics at the current state.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_metrics(sim: *mut SfSimulation, out: *mut SfMetrics) -> SfStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulation"))?;
        let out = out.as_mut().ok_or_else(|| null("metrics"))?;
        let r = sim.inner.record()?;
        *out = SfMetrics {
            t: r.t,
            n: r.n,
            provisional: r.provisional,
            f: r.f,
            f_max: r.f_max,
            f_uni: r.f_uni,
            f_est: r.f_est,
            e_est: r.e_est,
            m_uni: r.m_uni,
            m_cover: r.m_cover,
            connected: r.connected,
            min_distance: r.min_distance,
        };
        Ok(())
    })
}

/// Adds `count` robots at the given positions (row-major) and resets the estimator.
///
/// # Safety
/// `sim` must be a live handle; `coords` must hold `count * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_add_robots(sim: *mut SfSimulation, coords: *const f64, count: usize) -> SfStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulation"))?;
        let dim = sim.inner.config().dim;
        let flat = input(coords, count * dim, "coords")?;
        let points = Points::new(dim, flat.to_vec())?;
        sim.inner.apply_event(&EventAction::AddAt(points))?;
        Ok(())
    })
}

/// Removes robots by id and resets the estimator. Nothing changes on error.
///
/// # Safety
/// `sim` must be a live handle; `ids` must hold `count` values.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_remove_robots(sim: *mut SfSimulation, ids: *const u64, count: usize) -> SfStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulation"))?;
        let ids = input(ids, count, "ids")?;
        sim.inner.apply_event(&EventAction::Remove(ids.to_vec()))?;
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_simulation_free(sim: *mut SfSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Selects a kernel bandwidth for `robots` robots on `shape` by
/// deterministic annealing with the default schedule.
///
/// # Safety
/// `shape` must be a live handle; `beta_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_anneal_beta(
    shape: *const SfShape,
    robots: usize,
    d_min: f64,
    seed: u64,
    beta_out: *mut f64,
) -> SfStatus {
    guard(|| {
        let shape = shape.as_ref().ok_or_else(|| null("shape"))?;
        let beta_out = beta_out.as_mut().ok_or_else(|| null("beta_out"))?;
        let cfg = AnnealConfig {
            d_min,
            seed,
            ..Default::default()
        };
        *beta_out = anneal_beta(&shape.inner, robots, &cfg)?.beta;
        Ok(())
    })
}
