use proptest::prelude::*;

use swarmform::controller::{control_step, meanshift_command, ControlDiagnostics, ControlParams, EstimatePolicy};
use swarmform::geometry::{dist, dot, Points};
use swarmform::protocols::{min_gamma, CommGraph, EstimatorScheme, MassEstimator};
use swarmform::{Kernel, SamplePointSet, ShapePose};

fn cloud(n: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec([-10.0..10.0f64, -10.0..10.0f64], n)
}

fn distinct(rows: &[[f64; 2]]) -> Points {
    // nudge each row by its index so no two coincide
    let coords = rows.iter().enumerate().flat_map(|(i, r)| [r[0] + i as f64 * 1e-3, r[1]]).collect();
    Points::new(2, coords).unwrap()
}

proptest! {
    #[test]
    fn placement_is_an_isometry(rows in cloud(6), x in -50.0..50.0f64, y in -50.0..50.0f64, th in -10.0..10.0f64) {
        let set = SamplePointSet::new(distinct(&rows), 0.5, None).unwrap();
        let world = swarmform::shape::to_world(&set, &ShapePose::new(vec![x, y], th)).unwrap();
        let (a, b) = (set.points(), world.points());
        for i in 0..a.len() {
            for j in 0..a.len() {
                prop_assert!((dist(a.get(i), a.get(j)) - dist(b.get(i), b.get(j))).abs() < 1e-9);
            }
        }
        let anchor = set.anchor_index();
        prop_assert!((b.get(anchor)[0] - x).abs() < 1e-12 && (b.get(anchor)[1] - y).abs() < 1e-12);
    }

    #[test]
    fn sensing_graph_is_simple_and_symmetric(rows in cloud(12), r in 0.1..8.0f64) {
        let pts = Points::new(2, rows.iter().flatten().copied().collect()).unwrap();
        let g = CommGraph::build(&pts, r);
        for i in 0..g.len() {
            prop_assert!(!g.has_edge(i, i));
            for j in 0..g.len() {
                prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                if i != j {
                    prop_assert_eq!(g.has_edge(i, j), dist(pts.get(i), pts.get(j)) <= r);
                }
            }
        }
    }

    #[test]
    fn commands_are_conflict_free(
        samples in cloud(8),
        weights in prop::collection::vec(1e-6..1.0f64, 8),
        nb in prop::collection::vec([-1.2..1.2f64, -1.2..1.2f64], 0..6),
        eps in 1e-9..0.9f64,
        v_max in 0.1..5.0f64,
    ) {
        let params = ControlParams { eps, v_max, ..ControlParams::default() };
        let q = Points::new(2, samples.iter().flatten().copied().collect()).unwrap();
        let mut d = ControlDiagnostics::default();
        let cmd = control_step(
            &[0.0, 0.0], &q, &weights, nb.iter().map(|p| &p[..]),
            &Kernel::new(1.5).unwrap(), &params, EstimatePolicy::Strict, &mut d,
        ).unwrap();
        let sum: Vec<f64> = cmd.v_ms.iter().zip(&cmd.v_cv).map(|(a, b)| a + b).collect();
        prop_assert!(dot(&sum, &cmd.v_ms) - eps * dot(&cmd.v_ms, &cmd.v_ms) >= -1e-12);
        prop_assert!(dot(&cmd.v, &cmd.v).sqrt() <= v_max + 1e-12);
    }

    #[test]
    fn meanshift_target_lies_in_the_hull(samples in cloud(5), weights in prop::collection::vec(1e-3..1.0f64, 5), p in [-5.0..5.0f64, -5.0..5.0f64]) {
        let q = Points::new(2, samples.iter().flatten().copied().collect()).unwrap();
        let params = ControlParams { sigma1: 1.0, ..ControlParams::default() };
        let mut d = ControlDiagnostics::default();
        let v = meanshift_command(&p, &q, &weights, &Kernel::new(0.05).unwrap(), &params, EstimatePolicy::Strict, &mut d).unwrap();
        let target = [p[0] + 5.0 * v[0], p[1] + 5.0 * v[1]];
        let (lo_x, hi_x) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s[0]), h.max(s[0])));
        let (lo_y, hi_y) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s[1]), h.max(s[1])));
        prop_assert!(target[0] >= lo_x - 1e-9 && target[0] <= hi_x + 1e-9);
        prop_assert!(target[1] >= lo_y - 1e-9 && target[1] <= hi_y + 1e-9);
    }

    #[test]
    fn gain_bound_dominates_the_kernel_slope(beta in 0.01..20.0f64, v_max in 0.1..5.0f64) {
        let kernel = Kernel::new(beta).unwrap();
        let per_neighbor = min_gamma(2, &kernel, v_max);
        let reach = 4.0 / beta.sqrt();
        let steepest = (0..=20_000)
            .map(|s| reach * s as f64 / 20_000.0)
            .map(|r| 2.0 * beta * r * (-beta * r * r).exp() * v_max)
            .fold(0.0, f64::max);
        prop_assert!(steepest <= per_neighbor * (1.0 + 1e-12));
        prop_assert!(steepest >= per_neighbor * (1.0 - 1e-6));
        prop_assert!((min_gamma(7, &kernel, v_max) - 6.0 * per_neighbor).abs() <= 1e-12 * per_neighbor);
    }

    #[test]
    fn limited_rounds_conserve_and_stay_positive(
        rows in cloud(8),
        gamma in 0.1..50.0f64,
        dt in 1e-4..0.1f64,
        steps in 1usize..200,
    ) {
        let pts = Points::new(2, rows.iter().flatten().copied().collect()).unwrap();
        let samples = Points::from_rows(2, &[[0.0, 0.0], [3.0, 1.0], [-2.0, 4.0]]).unwrap();
        let kernel = Kernel::new(0.1).unwrap();
        let graph = CommGraph::build(&pts, 6.0);
        let mut est = MassEstimator::new(8, 3, gamma).unwrap().with_scheme(EstimatorScheme::Limited);
        est.refresh(&pts, |_| &samples, &kernel).unwrap();
        let lowest: Vec<f64> = (0..3).map(|k| (0..8).map(|i| est.reference(i)[k]).fold(f64::INFINITY, f64::min)).collect();
        for _ in 0..steps {
            est.step(&graph, dt);
        }
        for k in 0..3 {
            prop_assert!(est.internal_sum(k).abs() <= 1e-12);
            for i in 0..8 {
                prop_assert!(est.estimates(i)[k] >= lowest[k] * (1.0 - 1e-12));
            }
        }
    }
}
