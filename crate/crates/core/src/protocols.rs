//! Proximity graph and the two consensus layers run over it: finite-time
//! shape-pose negotiation and dynamic-average mass estimation.
//!
//! Both layers are discretized by explicit Euler on synchronous rounds:
//! every update reads the state snapshot from the start of the round.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Points};
use crate::mass::Kernel;
use crate::shape::ShapePose;

/// Signum with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    ((x > 0.0) as i32 - (x < 0.0) as i32) as f64
}

/// Undirected proximity graph, `(i, j)` an edge iff `|p_i - p_j| <= r_sense`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    adjacency: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn build(positions: &Points, r_sense: f64) -> Self {
        let n = positions.len();
        let r2 = r_sense * r_sense;
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if dist_sq(positions.get(i), positions.get(j)) <= r2 {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        // pushes happen in ascending j for both endpoints, lists stay sorted
        CommGraph { adjacency }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i != j && !adjacency[i].contains(&j) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        CommGraph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Breadth-first reachability from robot 0. An empty graph is not connected.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegotiationGains {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
}

impl NegotiationGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Config(format!(
                "negotiation gains must be positive (c1 = {}, c2 = {})",
                self.c1, self.c2
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

impl Default for NegotiationGains {
    fn default() -> Self {
        NegotiationGains {
            c1: 1.6,
            c2: 1.6,
            alpha: 0.8,
        }
    }
}

/// Per-robot interpretations of the shape pose.
#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationState {
    positions: Points,
    orientations: Vec<f64>,
    gains: NegotiationGains,
}

impl NegotiationState {
    pub fn new(positions: Points, orientations: Vec<f64>, gains: NegotiationGains) -> Result<Self> {
        gains.validate()?;
        if positions.len() != orientations.len() {
            return Err(Error::invalid(format!(
                "{} position interpretations but {} orientations",
                positions.len(),
                orientations.len()
            )));
        }
        Ok(NegotiationState {
            positions,
            orientations,
            gains,
        })
    }

    pub fn len(&self) -> usize {
        self.orientations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientations.is_empty()
    }

    pub fn positions(&self) -> &Points {
        &self.positions
    }

    pub fn orientations(&self) -> &[f64] {
        &self.orientations
    }

    pub fn gains(&self) -> &NegotiationGains {
        &self.gains
    }

    /// Robot `i`'s current view of the pose.
    pub fn pose_of(&self, i: usize) -> ShapePose {
        ShapePose::new(self.positions.get(i).to_vec(), self.orientations[i])
    }

    /// Mean interpretation; the protocol preserves it, so it is also the consensus value.
    pub fn mean_pose(&self) -> ShapePose {
        let n = self.len() as f64;
        ShapePose::new(
            self.positions.centroid(),
            self.orientations.iter().sum::<f64>() / n,
        )
    }

    /// One explicit-Euler round of
    /// `dx_i/dt = -c sum_{j in N_i} sign(x_i - x_j) |x_i - x_j|^alpha` (componentwise).
    pub fn step(&mut self, graph: &CommGraph, dt: f64) {
        let alpha = self.gains.alpha;
        let coupling = |a: f64, b: f64| {
            let d = a - b;
            sign(d) * d.abs().powf(alpha)
        };
        let dim = self.positions.dim();
        let snapshot_pos = self.positions.clone();
        let snapshot_ori = self.orientations.clone();
        let mut acc = vec![0.0; dim];
        for i in 0..self.len() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut acc_ori = 0.0;
            let qi = snapshot_pos.get(i);
            for &j in graph.neighbors(i) {
                let qj = snapshot_pos.get(j);
                for c in 0..dim {
                    acc[c] += coupling(qi[c], qj[c]);
                }
                acc_ori += coupling(snapshot_ori[i], snapshot_ori[j]);
            }
            let out = self.positions.get_mut(i);
            for c in 0..dim {
                out[c] -= dt * self.gains.c1 * acc[c];
            }
            self.orientations[i] -= dt * self.gains.c2 * acc_ori;
        }
    }

    /// Largest spread (max minus min over robots) of any position component or the orientation.
    pub fn spread(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.positions.dim() {
            let (lo, hi) = self
                .positions
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[c]), hi.max(p[c])));
            worst = worst.max(hi - lo);
        }
        let (lo, hi) = self
            .orientations
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        worst.max(hi - lo)
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.spread() < tol
    }

    pub(crate) fn push(&mut self, pose: &ShapePose) -> Result<()> {
        self.positions.push(&pose.position)?;
        self.orientations.push(pose.orientation);
        Ok(())
    }

    pub(crate) fn remove(&mut self, i: usize) {
        self.positions.remove(i);
        self.orientations.remove(i);
    }
}

/// Estimator gain bound `(n - 1) sqrt(2 beta / e) v_max` that guarantees
/// tracking of the true masses while robots move at speeds up to `v_max`.
pub fn min_gamma(n: usize, kernel: &Kernel, v_max: f64) -> f64 {
    n.saturating_sub(1) as f64 * (2.0 * kernel.beta() / std::f64::consts::E).sqrt() * v_max
}

/// How one estimator round discretizes the sign coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorScheme {
    /// Plain explicit Euler: each edge moves `gamma dt sign(diff)`, which
    /// oscillates around agreement with amplitude about `gamma dt deg`.
    Sign,
    /// Explicit Euler with each edge's transfer capped at
    /// `|diff| / (1 + max(deg_i, deg_j))`, so a round never carries two
    /// estimates past each other. The coupling stays antisymmetric.
    #[default]
    Limited,
}

/// Dynamic average tracking of the masses: robot `i` holds
/// `P_hat[i][k] = exp(-beta |p_i - q_k|^2) + z[i][k]` and integrates
/// `dz[i][k]/dt = gamma sum_{j in N_i} sign(P_hat[j][k] - P_hat[i][k])`.
///
/// Storage is `n x m`, row-major by robot.
#[derive(Debug, Clone, PartialEq)]
pub struct MassEstimator {
    n: usize,
    m: usize,
    gamma: f64,
    scheme: EstimatorScheme,
    z: Vec<f64>,
    reference: Vec<f64>,
    estimates: Vec<f64>,
}

impl MassEstimator {
    pub fn new(n: usize, m: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        Ok(MassEstimator {
            n,
            m,
            gamma,
            scheme: EstimatorScheme::default(),
            z: vec![0.0; n * m],
            reference: vec![0.0; n * m],
            estimates: vec![0.0; n * m],
        })
    }

    pub fn robots(&self) -> usize {
        self.n
    }

    pub fn sample_points(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_scheme(mut self, scheme: EstimatorScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn scheme(&self) -> EstimatorScheme {
        self.scheme
    }

    /// Robot `i`'s estimate vector.
    pub fn estimates(&self, i: usize) -> &[f64] {
        &self.estimates[i * self.m..(i + 1) * self.m]
    }

    pub fn internal_state(&self, i: usize) -> &[f64] {
        &self.z[i * self.m..(i + 1) * self.m]
    }

    pub fn reference(&self, i: usize) -> &[f64] {
        &self.reference[i * self.m..(i + 1) * self.m]
    }

    /// `sum_i z[i][k]`; zero under exact arithmetic between resets.
    pub fn internal_sum(&self, k: usize) -> f64 {
        (0..self.n).map(|i| self.z[i * self.m + k]).sum()
    }

    /// Recomputes the reference signals `exp(-beta |p_i - q_k^(i)|^2)`, where
    /// robot `i` sees the sample points returned by `samples_for(i)`, and
    /// refreshes the estimates.
    pub fn refresh<'a, F>(&mut self, positions: &Points, samples_for: F, kernel: &Kernel) -> Result<()>
    where
        F: Fn(usize) -> &'a Points,
    {
        if positions.len() != self.n {
            return Err(Error::invalid(format!(
                "estimator sized for {} robots, got {} positions",
                self.n,
                positions.len()
            )));
        }
        for i in 0..self.n {
            let samples = samples_for(i);
            if samples.len() != self.m {
                return Err(Error::invalid(format!(
                    "estimator sized for {} sample points, got {}",
                    self.m,
                    samples.len()
                )));
            }
            let p = positions.get(i);
            let row = &mut self.reference[i * self.m..(i + 1) * self.m];
            for (r, q) in row.iter_mut().zip(samples.iter()) {
                *r = kernel.weight(p, q);
            }
        }
        self.recompute_estimates();
        Ok(())
    }

    fn recompute_estimates(&mut self) {
        for ((e, r), z) in self.estimates.iter_mut().zip(&self.reference).zip(&self.z) {
            *e = r + z;
        }
    }

    /// One synchronous explicit-Euler round against the pre-step estimates.
    pub fn step(&mut self, graph: &CommGraph, dt: f64) {
        let m = self.m;
        let gain = self.gamma * dt;
        for i in 0..self.n {
            let own = &self.estimates[i * m..(i + 1) * m];
            let z = &mut self.z[i * m..(i + 1) * m];
            for &j in graph.neighbors(i) {
                let other = &self.estimates[j * m..(j + 1) * m];
                match self.scheme {
                    EstimatorScheme::Sign => {
                        for ((z, a), b) in z.iter_mut().zip(own).zip(other) {
                            *z += gain * sign(b - a);
                        }
                    }
                    EstimatorScheme::Limited => {
                        let w = 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64);
                        for ((z, a), b) in z.iter_mut().zip(own).zip(other) {
                            let diff = b - a;
                            *z += sign(diff) * gain.min(w * diff.abs());
                        }
                    }
                }
            }
        }
        self.recompute_estimates();
    }

    /// Zeroes every internal state; estimates fall back to the reference signals.
    pub fn reset(&mut self) {
        self.z.iter_mut().for_each(|z| *z = 0.0);
        self.recompute_estimates();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, gap: f64) -> Points {
        let rows: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 * gap, 0.0]).collect();
        Points::from_rows(2, &rows).unwrap()
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(-3.0), -1.0);
        assert_eq!(sign(1e-300), 1.0);
    }

    #[test]
    fn inclusive_sensing_radius() {
        let p = Points::from_rows(2, &[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert!(CommGraph::build(&p, 5.0).has_edge(0, 1));
        assert!(!CommGraph::build(&p, 4.999).has_edge(0, 1));
    }

    #[test]
    fn collinear_robots_form_a_path() {
        let g = CommGraph::build(&line(3, 0.9), 1.0);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
        assert_eq!(g.edge_count(), 2);
        assert!(g.is_connected());
    }

    #[test]
    fn connectivity() {
        assert!(CommGraph::build(&line(1, 1.0), 1.0).edge_count() == 0);
        assert!(!CommGraph::build(&line(2, 2.0), 1.0).is_connected());
        let pairs = Points::from_rows(2, &[[0.0, 0.0], [0.5, 0.0], [10.0, 0.0], [10.5, 0.0]]).unwrap();
        assert!(!CommGraph::build(&pairs, 1.0).is_connected());
    }

    #[test]
    fn equal_interpretations_stay_put() {
        let q = Points::from_rows(2, &[[1.0, 2.0]; 4]).unwrap();
        let mut s = NegotiationState::new(q.clone(), vec![0.3; 4], NegotiationGains::default()).unwrap();
        s.step(&CommGraph::build(&line(4, 1.0), 1.5), 0.01);
        assert_eq!(s.positions(), &q);
        assert_eq!(s.orientations(), &[0.3; 4]);
        assert!(s.converged(1e-300));
    }

    #[test]
    fn spread_criterion() {
        let q = Points::from_rows(1, &[[0.0], [2e-6]]).unwrap();
        let s = NegotiationState::new(q, vec![0.0, 0.0], NegotiationGains::default()).unwrap();
        assert!(!s.converged(1e-6));
        assert!(s.converged(3e-6));
    }

    #[test]
    fn gains_are_validated() {
        let q = Points::from_rows(1, &[[0.0]]).unwrap();
        let bad = NegotiationGains { alpha: 1.0, ..Default::default() };
        assert!(NegotiationState::new(q.clone(), vec![0.0], bad).is_err());
        let bad = NegotiationGains { c1: 0.0, ..Default::default() };
        assert!(NegotiationState::new(q, vec![0.0], bad).is_err());
    }

    #[test]
    fn min_gamma_values() {
        let k = Kernel::new(1.5).unwrap();
        assert_eq!(min_gamma(1, &k, 1.0), 0.0);
        assert!((min_gamma(20, &k, 1.0) - 19.960_296_460_440_464).abs() < 1e-12);
        assert_eq!(min_gamma(20, &k, 2.0), 2.0 * min_gamma(20, &k, 1.0));
    }

    #[test]
    fn lone_robot_estimates_exactly() {
        let k = Kernel::new(1.5).unwrap();
        let p = Points::from_rows(2, &[[0.3, 0.1]]).unwrap();
        let q = Points::from_rows(2, &[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let mut est = MassEstimator::new(1, 2, 5.0).unwrap();
        est.refresh(&p, |_| &q, &k).unwrap();
        let g = CommGraph::build(&p, 5.0);
        for _ in 0..100 {
            est.step(&g, 0.01);
        }
        let truth = crate::mass::mass_vector(&p, &q, &k).unwrap();
        assert_eq!(est.estimates(0), truth.values());
    }

    #[test]
    fn reset_restores_zero_sum() {
        let k = Kernel::new(1.5).unwrap();
        let p = line(3, 1.0);
        let q = Points::from_rows(2, &[[0.0, 0.5], [2.0, 0.0]]).unwrap();
        let mut est = MassEstimator::new(3, 2, 0.5).unwrap();
        est.refresh(&p, |_| &q, &k).unwrap();
        let fresh = est.clone();
        est.reset();
        assert_eq!(est, fresh);

        let g = CommGraph::build(&p, 1.5);
        for _ in 0..50 {
            est.step(&g, 0.01);
        }
        assert!(est.internal_sum(0).abs() < 1e-12);
        // drop robot 0 by hand: the survivors no longer sum to zero
        let mut survivors = MassEstimator::new(2, 2, 0.5).unwrap();
        survivors.z = est.z[2..].to_vec();
        let p2 = Points::from_rows(2, &[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        survivors.refresh(&p2, |_| &q, &k).unwrap();
        assert!(survivors.internal_sum(0).abs() > 1e-3);
        survivors.reset();
        assert_eq!(survivors.internal_sum(0), 0.0);
        assert_eq!(survivors.internal_sum(1), 0.0);
    }
}
