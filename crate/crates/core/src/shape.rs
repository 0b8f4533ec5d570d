//! Desired shapes as discrete sample-point sets.
//!
//! A shape is stored in its own local frame. The swarm agrees on a
//! [`ShapePose`] and [`to_world`] places the sample points so that the
//! anchor point (the sample point nearest the centroid) lands on the
//! negotiated position.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_box, dist, dist_sq, find_self_intersection, point_in_polygon, signed_area, Points,
};

/// Spacing assigned to a loaded set holding a single point.
pub const SINGLE_POINT_SPACING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePointSet {
    points: Points,
    spacing: f64,
    center: Vec<f64>,
    anchor: usize,
    outline: Option<Vec<[f64; 2]>>,
}

impl SamplePointSet {
    /// Builds a set from local-frame points; `outline` is the source polygon, if any.
    pub fn new(points: Points, spacing: f64, outline: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoSamplePoints);
        }
        if !points.is_finite() {
            return Err(Error::invalid("sample points must be finite"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        if outline.is_some() && points.dim() != 2 {
            return Err(Error::invalid("an outline polygon requires 2-D points"));
        }
        let center = points.centroid();
        let anchor = nearest_index(&points, &center);
        Ok(SamplePointSet {
            points,
            spacing,
            center,
            anchor,
            outline,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Nominal inter-point distance `d_pts`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn anchor_index(&self) -> usize {
        self.anchor
    }

    pub fn anchor(&self) -> &[f64] {
        self.points.get(self.anchor)
    }

    pub fn outline(&self) -> Option<&[[f64; 2]]> {
        self.outline.as_deref()
    }
}

/// Index of the point nearest `target`; ties go to the lowest index.
fn nearest_index(points: &Points, target: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, p) in points.iter().enumerate() {
        let d = dist_sq(p, target);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapePose {
    pub position: Vec<f64>,
    /// Radians, only meaningful in 2-D. Never wrapped.
    pub orientation: f64,
}

impl ShapePose {
    pub fn new(position: Vec<f64>, orientation: f64) -> Self {
        ShapePose {
            position,
            orientation,
        }
    }
}

/// Region used for "inside the shape" tests.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeRegion {
    Polygon(Vec<[f64; 2]>),
    /// Union of balls of `radius` around the sample points.
    Balls { centers: Points, radius: f64 },
}

impl ShapeRegion {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            ShapeRegion::Polygon(poly) => point_in_polygon([p[0], p[1]], poly),
            ShapeRegion::Balls { centers, radius } => {
                let r2 = radius * radius;
                centers.iter().any(|c| dist_sq(c, p) <= r2)
            }
        }
    }

    /// Axis-aligned 2-D bounds of the region.
    pub fn bounds_2d(&self) -> Result<([f64; 2], [f64; 2])> {
        match self {
            ShapeRegion::Polygon(poly) => Ok(bounding_box(poly)),
            ShapeRegion::Balls { centers, radius } => {
                if centers.dim() != 2 {
                    return Err(Error::Unsupported(format!(
                        "planar bounds of a {}-D region",
                        centers.dim()
                    )));
                }
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for c in centers.iter() {
                    for a in 0..2 {
                        lo[a] = lo[a].min(c[a] - radius);
                        hi[a] = hi[a].max(c[a] + radius);
                    }
                }
                Ok((lo, hi))
            }
        }
    }
}

/// Sample points placed in the world frame by a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSampleSet {
    points: Points,
    pose: ShapePose,
    spacing: f64,
    outline: Option<Vec<[f64; 2]>>,
}

impl WorldSampleSet {
    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn pose(&self) -> &ShapePose {
        &self.pose
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// World-frame source polygon, when the shape came from one.
    pub fn outline(&self) -> Option<&[[f64; 2]]> {
        self.outline.as_deref()
    }

    /// The source polygon if known, else balls of radius `d_pts/2` around the points.
    pub fn region(&self) -> ShapeRegion {
        match &self.outline {
            Some(poly) => ShapeRegion::Polygon(poly.clone()),
            None => ShapeRegion::Balls {
                centers: self.points.clone(),
                radius: 0.5 * self.spacing,
            },
        }
    }
}

/// Places `set` in the world frame: `q_k = R(theta) (x_k - x_anchor) + q_o`.
///
/// Rotation applies only in 2-D; other dimensions translate.
pub fn to_world(set: &SamplePointSet, pose: &ShapePose) -> Result<WorldSampleSet> {
    let dim = set.dim();
    if pose.position.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: pose.position.len(),
        });
    }
    if !pose.position.iter().all(|c| c.is_finite()) || !pose.orientation.is_finite() {
        return Err(Error::invalid("shape pose must be finite"));
    }
    let anchor = set.anchor().to_vec();
    let (s, c) = pose.orientation.sin_cos();
    let place = |x: &[f64], out: &mut Vec<f64>| {
        if dim == 2 {
            let (dx, dy) = (x[0] - anchor[0], x[1] - anchor[1]);
            out.push(c * dx - s * dy + pose.position[0]);
            out.push(s * dx + c * dy + pose.position[1]);
        } else {
            out.extend(x.iter().zip(&anchor).zip(&pose.position).map(|((x, a), q)| x - a + q));
        }
    };
    let mut coords = Vec::with_capacity(set.points().as_flat().len());
    for x in set.points().iter() {
        place(x, &mut coords);
    }
    let outline = set.outline().map(|poly| {
        poly.iter()
            .map(|v| {
                let mut out = Vec::with_capacity(2);
                place(v, &mut out);
                [out[0], out[1]]
            })
            .collect()
    });
    Ok(WorldSampleSet {
        points: Points::new(dim, coords)?,
        pose: pose.clone(),
        spacing: set.spacing(),
        outline,
    })
}

/// Cell centers of a square grid of pitch `d_pts` anchored at the polygon's
/// bounding-box minimum, kept when inside or on the polygon. Row-major, `y` outer.
pub fn discretize_polygon(vertices: &[[f64; 2]], d_pts: f64) -> Result<SamplePointSet> {
    if vertices.len() < 3 {
        return Err(Error::invalid(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    if !(d_pts > 0.0 && d_pts.is_finite()) {
        return Err(Error::invalid(format!("d_pts must be positive, got {d_pts}")));
    }
    if vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid("polygon vertices must be finite"));
    }
    if signed_area(vertices).abs() <= f64::EPSILON * bbox_area_scale(vertices) {
        return Err(Error::DegeneratePolygon);
    }
    if let Some((a, b)) = find_self_intersection(vertices) {
        return Err(Error::SelfIntersectingPolygon(a, b));
    }
    let (lo, hi) = bounding_box(vertices);
    let cols = ((hi[0] - lo[0]) / d_pts).ceil() as usize;
    let rows = ((hi[1] - lo[1]) / d_pts).ceil() as usize;
    let mut pts = Points::with_capacity(2, cols * rows);
    for r in 0..rows {
        let y = lo[1] + (r as f64 + 0.5) * d_pts;
        for c in 0..cols {
            let x = lo[0] + (c as f64 + 0.5) * d_pts;
            if point_in_polygon([x, y], vertices) {
                pts.push(&[x, y])?;
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::EmptyDiscretization);
    }
    SamplePointSet::new(pts, d_pts, Some(vertices.to_vec()))
}

fn bbox_area_scale(vertices: &[[f64; 2]]) -> f64 {
    let (lo, hi) = bounding_box(vertices);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    span * span
}

/// Parses comma-separated rows; `#` starts a comment line. The first row fixes `d`.
pub fn parse_point_rows(text: &str) -> Result<Points> {
    let mut points: Option<Points> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("malformed coordinate {tok:?}"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse {
                        line: line_no,
                        message: format!("non-finite coordinate {tok:?}"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let pts = points.get_or_insert_with(|| Points::with_capacity(row.len(), 16));
        if row.len() != pts.dim() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} coordinates, found {}", pts.dim(), row.len()),
            });
        }
        pts.push(&row)?;
    }
    points.ok_or(Error::NoSamplePoints)
}

/// Reads sample points verbatim; `d_pts` is the minimum pairwise distance.
pub fn parse_points(text: &str) -> Result<SamplePointSet> {
    let pts = parse_point_rows(text)?;
    let spacing = if pts.len() == 1 {
        SINGLE_POINT_SPACING
    } else {
        pts.min_pairwise_distance()
    };
    if spacing == 0.0 {
        return Err(Error::invalid("duplicate sample points (zero spacing)"));
    }
    SamplePointSet::new(pts, spacing, None)
}

pub fn load_points(path: impl AsRef<Path>) -> Result<SamplePointSet> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_points(&text)
}

/// Reads a 2-D polygon in the sample-point file format.
pub fn load_polygon(path: impl AsRef<Path>) -> Result<Vec<[f64; 2]>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    let pts = parse_point_rows(&text)?;
    if pts.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: pts.dim(),
        });
    }
    Ok(pts.iter().map(|p| [p[0], p[1]]).collect())
}

/// Writes one point per line with 17 significant digits.
pub fn format_points(points: &Points) -> String {
    let mut out = String::new();
    for p in points.iter() {
        let row: Vec<String> = p.iter().map(|c| format!("{c:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub m: usize,
    pub n: usize,
    /// `m >= 5n`
    pub count_ok: bool,
    pub required_m: usize,
    /// `d_pts >= sqrt(pi n / m) * r_avoid`
    pub spacing_ok: bool,
    pub spacing_bound: f64,
    pub spacing: f64,
}

/// Advisory density conditions for `n` robots on this set. Never fails.
pub fn validate_density(set: &SamplePointSet, n: usize, r_avoid: f64) -> DensityReport {
    let m = set.len();
    let required_m = 5 * n;
    let spacing_bound = (std::f64::consts::PI * n as f64 / m as f64).sqrt() * r_avoid;
    DensityReport {
        m,
        n,
        count_ok: m >= required_m,
        required_m,
        spacing_ok: set.spacing() >= spacing_bound,
        spacing_bound,
        spacing: set.spacing(),
    }
}

impl std::fmt::Display for DensityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let flag = |ok| if ok { "pass" } else { "FAIL" };
        write!(
            f,
            "m = {} vs 5n = {}: {}; d_pts = {:.6} vs sqrt(pi n/m) r_avoid = {:.6}: {}",
            self.m,
            self.required_m,
            flag(self.count_ok),
            self.spacing,
            self.spacing_bound,
            flag(self.spacing_ok)
        )
    }
}

/// Largest distance from any world sample point to `p`.
pub fn max_distance_to(world: &WorldSampleSet, p: &[f64]) -> f64 {
    world.points().iter().map(|q| dist(q, p)).fold(0.0, f64::max)
}
