//! Evaluation metrics for a swarm snapshot: estimation error, spacing
//! uniformity, shape coverage and convergence time.

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Points};
use crate::protocols::{CommGraph, MassEstimator};
use crate::shape::ShapeRegion;

/// `max_{i,k} |P_hat[i][k] - P_k|`, where `truth(i)` is the true mass
/// vector in robot `i`'s frame.
pub fn e_est<'a, F>(estimator: &MassEstimator, truth: F) -> f64
where
    F: Fn(usize) -> &'a [f64],
{
    (0..estimator.robots())
        .flat_map(|i| {
            estimator
                .estimates(i)
                .iter()
                .zip(truth(i))
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// `sum_i (r_min_i - mean r_min)^2` over robots with at least one neighbor,
/// `r_min_i` being the distance to the nearest graph neighbor.
pub fn m_uni(positions: &Points, graph: &CommGraph) -> f64 {
    let r_min: Vec<f64> = (0..positions.len())
        .filter_map(|i| {
            graph
                .neighbors(i)
                .iter()
                .map(|&j| dist_sq(positions.get(i), positions.get(j)))
                .reduce(f64::min)
                .map(f64::sqrt)
        })
        .collect();
    if r_min.is_empty() {
        return 0.0;
    }
    let mean = r_min.iter().sum::<f64>() / r_min.len() as f64;
    r_min.iter().map(|r| (r - mean) * (r - mean)).sum()
}

/// Raster of a planar shape region used for the coverage rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    cells: Vec<[f64; 2]>,
    pitch: f64,
}

impl CoverageGrid {
    /// Cell centers of a pitch-`pitch` grid anchored at the region's bounding-box minimum.
    pub fn new(region: &ShapeRegion, pitch: f64) -> Result<Self> {
        if !(pitch > 0.0) {
            return Err(Error::invalid(format!("raster pitch must be positive, got {pitch}")));
        }
        let (lo, hi) = region.bounds_2d()?;
        let cols = ((hi[0] - lo[0]) / pitch).ceil() as usize;
        let rows = ((hi[1] - lo[1]) / pitch).ceil() as usize;
        let mut cells = Vec::new();
        for r in 0..rows {
            let y = lo[1] + (r as f64 + 0.5) * pitch;
            for c in 0..cols {
                let x = lo[0] + (c as f64 + 0.5) * pitch;
                if region.contains(&[x, y]) {
                    cells.push([x, y]);
                }
            }
        }
        Ok(CoverageGrid { cells, pitch })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// `S_shape = count * pitch^2`.
    pub fn area(&self) -> f64 {
        self.cells.len() as f64 * self.pitch * self.pitch
    }

    /// `sqrt(3 S_shape / (2 n pi))`.
    pub fn cover_radius(&self, n: usize) -> f64 {
        (3.0 * self.area() / (2.0 * n as f64 * std::f64::consts::PI)).sqrt()
    }

    /// Percentage of shape cells within `r_cover(n)` of some robot.
    pub fn coverage(&self, positions: &Points) -> Result<f64> {
        if positions.dim() != 2 {
            return Err(Error::Unsupported(format!("coverage rate in {} dimensions", positions.dim())));
        }
        if positions.is_empty() {
            return Err(Error::NoRobots);
        }
        if self.cells.is_empty() {
            return Ok(0.0);
        }
        let r = self.cover_radius(positions.len());
        Ok(100.0 * self.covered_within(positions, r) as f64 / self.cells.len() as f64)
    }

    pub fn covered_within(&self, positions: &Points, radius: f64) -> usize {
        let r2 = radius * radius;
        self.cells
            .iter()
            .filter(|c| positions.iter().any(|p| dist_sq(p, &c[..]) <= r2))
            .count()
    }
}

/// Robot positions at one recorded instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub ids: Vec<u64>,
    pub positions: Points,
    pub velocities: Points,
}

/// Earliest frame time from which every robot stays inside `region` for
/// all later frames, or `None` if the last frame has a robot outside.
pub fn detect_t_conv(frames: &[Frame], region: &ShapeRegion) -> Option<f64> {
    let mut since = None;
    for f in frames {
        if f.positions.iter().all(|p| region.contains(p)) {
            since.get_or_insert(f.t);
        } else {
            since = None;
        }
    }
    since
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{discretize_polygon, to_world, ShapePose};

    fn pts(rows: &[[f64; 2]]) -> Points {
        Points::from_rows(2, rows).unwrap()
    }

    #[test]
    fn m_uni_examples() {
        let ring: Vec<[f64; 2]> = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 8.0;
                [3.0 * a.cos(), 3.0 * a.sin()]
            })
            .collect();
        let p = pts(&ring);
        assert!(m_uni(&p, &CommGraph::build(&p, 10.0)) < 1e-28);

        let pair = pts(&[[0.0, 0.0], [0.3, 0.4]]);
        assert_eq!(m_uni(&pair, &CommGraph::build(&pair, 1.0)), 0.0);

        // r_min = (1, 1, 2): mean 4/3, sum of squares 1/9 + 1/9 + 4/9
        let line = pts(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let v = m_uni(&line, &CommGraph::build(&line, 5.0));
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_robots_are_excluded() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [50.0, 0.0]]);
        assert_eq!(m_uni(&p, &CommGraph::build(&p, 5.0)), 0.0);
    }

    fn square_grid(side: f64, pitch: f64) -> CoverageGrid {
        let region = ShapeRegion::Polygon(vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]]);
        CoverageGrid::new(&region, pitch).unwrap()
    }

    #[test]
    fn full_and_empty_coverage() {
        let grid = square_grid(2.0, 0.1);
        assert_eq!(grid.cell_count(), 400);
        assert!((grid.area() - 4.0).abs() < 1e-12);
        let dense: Vec<[f64; 2]> = (0..4)
            .flat_map(|i| (0..4).map(move |j| [0.25 + 0.5 * i as f64, 0.25 + 0.5 * j as f64]))
            .collect();
        // r_cover = sqrt(3*4/(2*16*pi)) = 0.345 > half-diagonal of a 0.5 cell
        assert_eq!(grid.coverage(&pts(&dense)).unwrap(), 100.0);
        assert_eq!(grid.coverage(&pts(&[[100.0, 100.0]])).unwrap(), 0.0);
    }

    #[test]
    fn single_disk_matches_its_area() {
        let d_pts = 0.5;
        let grid = square_grid(20.0, d_pts / 4.0);
        let robot = pts(&[[10.0, 10.0]]);
        let r = grid.cover_radius(16);
        let analytic = std::f64::consts::PI * r * r / (grid.pitch() * grid.pitch());
        let got = grid.covered_within(&robot, r) as f64;
        assert!((got - analytic).abs() / analytic < 0.02, "{got} vs {analytic}");
    }

    #[test]
    fn coverage_requires_planar_positions() {
        let grid = square_grid(1.0, 0.1);
        let p3 = Points::from_rows(3, &[[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(grid.coverage(&p3), Err(Error::Unsupported(_))));
    }

    fn frame(t: f64, rows: &[[f64; 2]]) -> Frame {
        Frame {
            t,
            ids: (0..rows.len() as u64).collect(),
            positions: pts(rows),
            velocities: pts(&vec![[0.0, 0.0]; rows.len()]),
        }
    }

    #[test]
    fn convergence_time() {
        let region = ShapeRegion::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let inside = [[0.5, 0.5], [0.2, 0.9]];
        let outside = [[0.5, 0.5], [2.0, 0.9]];
        let all_in: Vec<Frame> = (0..5).map(|s| frame(s as f64 * 0.1, &inside)).collect();
        assert_eq!(detect_t_conv(&all_in, &region), Some(0.0));

        let mut exits = all_in.clone();
        exits.push(frame(0.5, &outside));
        assert_eq!(detect_t_conv(&exits, &region), None);

        let scripted: Vec<Frame> = (0..12)
            .map(|s| {
                let t = s as f64 * 0.25;
                // out, briefly in at 3, out again, then in for good from record 7
                if s == 3 || s >= 7 {
                    frame(t, &inside)
                } else {
                    frame(t, &outside)
                }
            })
            .collect();
        assert_eq!(detect_t_conv(&scripted, &region), Some(7.0 * 0.25));
    }

    #[test]
    fn ball_region_from_points() {
        let set = crate::shape::parse_points("0,0\n1,0\n").unwrap();
        let world = to_world(&set, &ShapePose::new(vec![0.0, 0.0], 0.0)).unwrap();
        let region = world.region();
        assert!(region.contains(&[0.5, 0.0]));
        assert!(!region.contains(&[0.5, 0.1]));
        let poly = discretize_polygon(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0.2).unwrap();
        let world = to_world(&poly, &ShapePose::new(poly.anchor().to_vec(), 0.0)).unwrap();
        assert!(matches!(world.region(), ShapeRegion::Polygon(_)));
    }
}
