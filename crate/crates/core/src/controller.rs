//! Per-robot velocity command: meanshift attraction toward the sample
//! points, conflict-free repulsion from close neighbors, then saturation.

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, dot, norm, Points};
use crate::mass::Kernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    /// Meanshift gain.
    pub sigma1: f64,
    /// Repulsion gain.
    pub sigma2: f64,
    /// Conflict-free margin, repulsion regularizer and `phi` scale.
    pub eps: f64,
    pub r_avoid: f64,
    pub v_max: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            sigma1: 30.0,
            sigma2: 1000.0,
            eps: 1e-8,
            r_avoid: 1.0,
            v_max: 1.0,
        }
    }
}

impl ControlParams {
    pub fn validate(&self, r_sense: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return fail(format!("sigma1 must be positive, got {}", self.sigma1));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return fail(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return fail(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if !(self.r_avoid > 0.0 && self.r_avoid < r_sense) {
            return fail(format!(
                "r_avoid must lie in (0, r_sense = {r_sense}), got {}",
                self.r_avoid
            ));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return fail(format!("v_max must be positive, got {}", self.v_max));
        }
        Ok(())
    }
}

/// How non-positive mass estimates are treated before inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatePolicy {
    /// Fail with [`Error::NonPositiveMass`].
    Strict,
    /// Clamp every estimate below at the given floor.
    Clamp(f64),
}

pub const DEFAULT_ESTIMATE_FLOOR: f64 = 1e-300;

impl Default for EstimatePolicy {
    fn default() -> Self {
        EstimatePolicy::Strict
    }
}

/// Work counters for one or more control evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControlDiagnostics {
    pub kernel_evals: usize,
    pub repulsion_terms: usize,
    /// Neighbors found at distance zero; their repulsion direction is undefined.
    pub coincident_neighbors: usize,
    pub clamped_estimates: usize,
}

impl std::ops::AddAssign for ControlDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.kernel_evals += o.kernel_evals;
        self.repulsion_terms += o.repulsion_terms;
        self.coincident_neighbors += o.coincident_neighbors;
        self.clamped_estimates += o.clamped_estimates;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCommand {
    pub v_ms: Vec<f64>,
    pub v_cv: Vec<f64>,
    /// Saturated total.
    pub v: Vec<f64>,
}

/// `v_ms = (sigma1/m) sum_k psi_k (q_k - p_i) / sum_k psi_k` with
/// `psi_k = exp(-beta |q_k - p_i|^2) / P_hat_k`.
///
/// The weights are normalized in the log domain, so the ratio stays
/// defined when every kernel value underflows.
pub fn meanshift_command(
    p_i: &[f64],
    samples: &Points,
    estimates: &[f64],
    kernel: &Kernel,
    params: &ControlParams,
    policy: EstimatePolicy,
    diag: &mut ControlDiagnostics,
) -> Result<Vec<f64>> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::NoSamplePoints);
    }
    if estimates.len() != m {
        return Err(Error::invalid(format!("{} estimates for {m} sample points", estimates.len())));
    }
    let mut log_w = Vec::with_capacity(m);
    let mut max_log = f64::NEG_INFINITY;
    for (k, (q, &est)) in samples.iter().zip(estimates).enumerate() {
        let est = match policy {
            EstimatePolicy::Strict if !(est > 0.0) => {
                return Err(Error::NonPositiveMass { index: k, value: est })
            }
            EstimatePolicy::Clamp(floor) if !(est >= floor) => {
                diag.clamped_estimates += 1;
                floor
            }
            _ => est,
        };
        diag.kernel_evals += 1;
        let lw = -kernel.beta() * dist_sq(q, p_i) - est.ln();
        max_log = max_log.max(lw);
        log_w.push(lw);
    }
    let mut num = vec![0.0; p_i.len()];
    let mut den = 0.0;
    for (q, lw) in samples.iter().zip(&log_w) {
        let w = (lw - max_log).exp();
        den += w;
        for ((acc, a), b) in num.iter_mut().zip(q).zip(p_i) {
            *acc += w * (a - b);
        }
    }
    let scale = params.sigma1 / m as f64 / den;
    num.iter_mut().for_each(|x| *x *= scale);
    Ok(num)
}

/// `sigma2 sum_{j in N'_i} (r_avoid - d_ij) / (d_ij + eps) (p_i - p_j)` over
/// the neighbors within `r_avoid`.
pub fn repulsion_raw<'a, I>(p_i: &[f64], neighbors: I, params: &ControlParams, diag: &mut ControlDiagnostics) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = vec![0.0; p_i.len()];
    let r2 = params.r_avoid * params.r_avoid;
    for p_j in neighbors {
        let d2 = dist_sq(p_i, p_j);
        if d2 > r2 {
            continue;
        }
        diag.repulsion_terms += 1;
        if d2 == 0.0 {
            diag.coincident_neighbors += 1;
            continue;
        }
        let d = d2.sqrt();
        let s = params.sigma2 * (params.r_avoid - d) / (d + params.eps);
        for ((o, a), b) in out.iter_mut().zip(p_i).zip(p_j) {
            *o += s * (a - b);
        }
    }
    out
}

/// Self-tuning repulsion gain in `[0, 1]` that keeps the repulsion from
/// cancelling more than a `1 - eps` share of the meanshift command.
pub fn kappa2(v_ms: &[f64], v_cv_raw: &[f64], eps: f64) -> f64 {
    let ms2 = dot(v_ms, v_ms);
    let phi = (ms2 / eps).min(1.0);
    let inner = dot(v_ms, v_cv_raw);
    if inner >= 0.0 {
        phi
    } else {
        phi * (-(1.0 - eps) * ms2 / inner).min(1.0)
    }
}

/// Euclidean projection onto the ball of radius `v_max`.
pub fn saturate(v: &mut [f64], v_max: f64) {
    let n = norm(v);
    if n > v_max {
        let s = v_max / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// Full command for robot `i`; `neighbors` are its graph neighbors' positions.
#[allow(clippy::too_many_arguments)]
pub fn control_step<'a, I>(
    p_i: &[f64],
    samples: &Points,
    estimates: &[f64],
    neighbors: I,
    kernel: &Kernel,
    params: &ControlParams,
    policy: EstimatePolicy,
    diag: &mut ControlDiagnostics,
) -> Result<VelocityCommand>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let v_ms = meanshift_command(p_i, samples, estimates, kernel, params, policy, diag)?;
    let raw = repulsion_raw(p_i, neighbors, params, diag);
    let ms2 = dot(&v_ms, &v_ms);
    let inner = dot(&v_ms, &raw);
    let mut k2 = kappa2(&v_ms, &raw, params.eps);
    // When the gain binds, the margin holds with equality and rounding can
    // undercut it; shave the gain by the observed deficit until it holds.
    let mut attempts = 0;
    let (v_cv, mut v) = loop {
        let v_cv: Vec<f64> = raw.iter().map(|x| k2 * x).collect();
        let v: Vec<f64> = v_ms.iter().zip(&v_cv).map(|(a, b)| a + b).collect();
        let deficit = params.eps * ms2 - dot(&v, &v_ms);
        if deficit <= 0.0 || k2 == 0.0 {
            break (v_cv, v);
        }
        attempts += 1;
        k2 = if attempts > 64 {
            0.0
        } else {
            (k2 - 2.0 * deficit / inner.abs()).min(k2 * (1.0 - 8.0 * f64::EPSILON)).max(0.0)
        };
    };
    saturate(&mut v, params.v_max);
    Ok(VelocityCommand { v_ms, v_cv, v })
}
