//! Kernel bandwidth selection by deterministic annealing.
//!
//! Robots start at the sample centroid and alternate soft assignment
//! (E-step) and weighted-centroid updates (M-step) while the bandwidth is
//! raised geometrically, until the converged placement keeps every pair
//! of robots at least `d_min` apart.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Points};
use crate::shape::SamplePointSet;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub beta_initial: f64,
    pub beta_final: f64,
    /// Multiplier applied to beta after each rejected round.
    pub cooling: f64,
    /// Convergence threshold on the largest robot displacement per iteration.
    pub tolerance: f64,
    pub d_min: f64,
    /// Cap on E/M iterations at one bandwidth.
    pub max_inner_iterations: usize,
    /// Symmetry-breaking offsets are this fraction of the sample spacing.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            beta_initial: 0.01,
            beta_final: 150.0,
            cooling: 1.025,
            tolerance: 1e-3,
            d_min: 0.0,
            max_inner_iterations: 100_000,
            perturbation: 1e-6,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta_initial > 0.0
            && self.beta_initial < self.beta_final
            && self.beta_final.is_finite()
            && self.cooling > 1.0
            && self.tolerance > 0.0
            && self.d_min >= 0.0
            && self.max_inner_iterations > 0
            && self.perturbation >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid annealing settings: {self:?}")))
        }
    }
}

/// `m x n` association probabilities, row-major by sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct Associations {
    m: usize,
    n: usize,
    probs: Vec<f64>,
}

impl Associations {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.n..(k + 1) * self.n]
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.probs[k * self.n + i]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }
}

/// `A[k][i] = exp(-beta |q_k - p_i|^2) / sum_j exp(-beta |q_k - p_j|^2)`,
/// evaluated with the row maximum factored out.
pub fn e_step(robots: &Points, samples: &Points, beta: f64) -> Associations {
    let n = robots.len();
    let m = samples.len();
    let mut probs = Vec::with_capacity(m * n);
    let mut logits = vec![0.0; n];
    for q in samples.iter() {
        for (l, p) in logits.iter_mut().zip(robots.iter()) {
            *l = -beta * dist_sq(q, p);
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let start = probs.len();
        probs.extend(logits.iter().map(|l| (l - max).exp()));
        let row = &mut probs[start..];
        let total: f64 = row.iter().sum();
        if total.is_finite() && total > 0.0 {
            row.iter_mut().for_each(|a| *a /= total);
        } else {
            warn!("association row underflowed; using uniform weights");
            row.iter_mut().for_each(|a| *a = 1.0 / n as f64);
        }
    }
    Associations { m, n, probs }
}

/// `p_i = sum_k q_k A[k][i] / sum_k A[k][i]`; a robot with no association keeps `previous`.
pub fn m_step(samples: &Points, assoc: &Associations, previous: &Points) -> Points {
    let dim = samples.dim();
    let mut out = previous.clone();
    for i in 0..assoc.n {
        let mut acc = vec![0.0; dim];
        let mut total = 0.0;
        for (k, q) in samples.iter().enumerate() {
            let a = assoc.get(k, i);
            total += a;
            for (s, x) in acc.iter_mut().zip(q) {
                *s += a * x;
            }
        }
        if total > 0.0 {
            for (o, s) in out.get_mut(i).iter_mut().zip(&acc) {
                *o = s / total;
            }
        }
    }
    out
}

fn max_displacement(a: &Points, b: &Points) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| dist_sq(x, y)).fold(0.0, f64::max).sqrt()
}

/// Alternates E/M at fixed `beta` until the largest displacement drops
/// below `tolerance`. Returns the positions and the iteration count.
pub fn converge_at(samples: &Points, start: Points, beta: f64, config: &AnnealConfig) -> (Points, usize) {
    let mut positions = start;
    for it in 1..=config.max_inner_iterations {
        let assoc = e_step(&positions, samples, beta);
        let next = m_step(samples, &assoc, &positions);
        let moved = max_displacement(&next, &positions);
        positions = next;
        if moved < config.tolerance {
            return (positions, it);
        }
    }
    warn!("E/M did not converge at beta = {beta} within {} iterations", config.max_inner_iterations);
    (positions, config.max_inner_iterations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub beta: f64,
    pub positions: Points,
    /// No bandwidth below `beta_final` met `d_min`; `beta` is `beta_final`.
    pub exhausted: bool,
    pub rounds: usize,
    pub min_distance: f64,
}

/// Returns the first bandwidth on the schedule
/// `beta_initial * cooling^r` whose converged placement meets `d_min`.
///
/// Robots start coincident at the centroid, which the E/M map never
/// separates, so each round begins by offsetting every robot by a seeded
/// random vector of length `perturbation * d_pts`.
pub fn anneal_beta(shape: &SamplePointSet, n: usize, config: &AnnealConfig) -> Result<AnnealOutcome> {
    config.validate()?;
    if n == 0 {
        return Err(Error::NoRobots);
    }
    let samples = shape.points();
    let dim = samples.dim();
    let centroid = samples.centroid();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let offset = config.perturbation * shape.spacing();

    let mut positions = Points::from_rows(dim, &vec![centroid; n])?;
    let mut beta = config.beta_initial;
    let mut rounds = 0;
    while beta < config.beta_final {
        rounds += 1;
        perturb(&mut positions, offset, &mut rng);
        let (next, _) = converge_at(samples, positions, beta, config);
        positions = next;
        let d = positions.min_pairwise_distance();
        if d >= config.d_min {
            return Ok(AnnealOutcome {
                beta,
                positions,
                exhausted: false,
                rounds,
                min_distance: d,
            });
        }
        beta *= config.cooling;
    }
    warn!("annealing exhausted the schedule without meeting d_min = {}", config.d_min);
    let min_distance = positions.min_pairwise_distance();
    Ok(AnnealOutcome {
        beta: config.beta_final,
        positions,
        exhausted: true,
        rounds,
        min_distance,
    })
}

fn perturb(positions: &mut Points, length: f64, rng: &mut ChaCha8Rng) {
    if length == 0.0 || positions.len() < 2 {
        return;
    }
    let dim = positions.dim();
    for i in 0..positions.len() {
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for (p, d) in positions.get_mut(i).iter_mut().zip(&dir) {
            *p += length * d / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::discretize_polygon;

    fn unit_square() -> SamplePointSet {
        discretize_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 0.1).unwrap()
    }

    #[test]
    fn single_robot_associations() {
        let robots = Points::from_rows(2, &[[0.3, 0.3]]).unwrap();
        let a = e_step(&robots, unit_square().points(), 2.0);
        assert!(a.probs.iter().all(|&x| x == 1.0));
        let p = m_step(unit_square().points(), &a, &robots);
        let c = unit_square().points().centroid();
        assert!((p.get(0)[0] - c[0]).abs() < 1e-14 && (p.get(0)[1] - c[1]).abs() < 1e-14);
    }

    #[test]
    fn equidistant_robots_split_evenly() {
        let robots = Points::from_rows(2, &[[-1.0, 0.0], [1.0, 0.0]]).unwrap();
        let q = Points::from_rows(2, &[[0.0, 3.0]]).unwrap();
        let a = e_step(&robots, &q, 5.0);
        assert_eq!(a.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn far_rows_do_not_underflow() {
        let robots = Points::from_rows(2, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let q = Points::from_rows(2, &[[1e4, 0.0]]).unwrap();
        let a = e_step(&robots, &q, 150.0);
        assert_eq!(a.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn lone_robot_accepts_the_first_bandwidth() {
        let cfg = AnnealConfig { d_min: 5.0, ..Default::default() };
        let out = anneal_beta(&unit_square(), 1, &cfg).unwrap();
        assert_eq!(out.beta, cfg.beta_initial);
        assert!(out.min_distance.is_infinite());
        assert!(!out.exhausted);
    }

    #[test]
    fn zero_spacing_requirement_accepts_immediately() {
        let out = anneal_beta(&unit_square(), 6, &AnnealConfig::default()).unwrap();
        assert_eq!(out.beta, 0.01);
        assert_eq!(out.rounds, 1);
    }

    #[test]
    fn impossible_spacing_exhausts() {
        let cfg = AnnealConfig {
            d_min: 10.0,
            beta_initial: 1.0,
            beta_final: 2.0,
            ..Default::default()
        };
        let out = anneal_beta(&unit_square(), 3, &cfg).unwrap();
        assert!(out.exhausted);
        assert_eq!(out.beta, 2.0);
        // 1.025^r >= 2 first at r = 29
        assert_eq!(out.rounds, 29);
    }

    #[test]
    fn invalid_settings() {
        let bad = AnnealConfig { cooling: 1.0, ..Default::default() };
        assert!(anneal_beta(&unit_square(), 3, &bad).is_err());
        assert!(anneal_beta(&unit_square(), 0, &AnnealConfig::default()).is_err());
    }
}
