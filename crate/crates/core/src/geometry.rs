//! Points, shapes, trajectories and sampling grids for 2D and 3D scenes.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (only 2 and 3 are allowed)")]
    UnsupportedDimension(usize),
    #[error("direction must have unit norm, got |x| = {0}")]
    NotUnit(f64),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("time {t} outside trajectory domain [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },
    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),
    #[error("projection of {shape} not resolved: widths {coarse} and {fine} differ by more than 1e-3")]
    UnresolvedProjection { shape: &'static str, coarse: f64, fine: f64 },
    #[error("quadrature needs at least 4 points per axis, got {0}")]
    TooFewPoints(usize),
}

/// A point (or vector) in ℝ² or ℝ³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; 3],
    dim: usize,
}

impl Point {
    pub fn new2(x: f64, y: f64) -> Self {
        Self { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Self { coords: [x, y, z], dim: 3 }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self, GeometryError> {
        match v.len() {
            2 => Ok(Self::new2(v[0], v[1])),
            3 => Ok(Self::new3(v[0], v[1], v[2])),
            n => Err(GeometryError::UnsupportedDimension(n)),
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self { coords: [0.0; 3], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn z(&self) -> f64 {
        self.coords[2]
    }

    /// Dot product; components beyond the shorter dimension are treated as zero.
    pub fn dot(&self, other: &Point) -> f64 {
        self.coords[0] * other.coords[0] + self.coords[1] * other.coords[1] + self.coords[2] * other.coords[2]
    }

    pub fn add(&self, other: &Point) -> Point {
        Point {
            coords: [
                self.coords[0] + other.coords[0],
                self.coords[1] + other.coords[1],
                self.coords[2] + other.coords[2],
            ],
            dim: self.dim,
        }
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point {
            coords: [
                self.coords[0] - other.coords[0],
                self.coords[1] - other.coords[1],
                self.coords[2] - other.coords[2],
            ],
            dim: self.dim,
        }
    }

    pub fn scale(&self, s: f64) -> Point {
        Point { coords: [self.coords[0] * s, self.coords[1] * s, self.coords[2] * s], dim: self.dim }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    fn check_dim(&self, dim: usize) -> Result<(), GeometryError> {
        if self.dim == dim {
            Ok(())
        } else {
            Err(GeometryError::DimensionMismatch { expected: dim, got: self.dim })
        }
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Point::from_slice(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

/// Unit observation direction x̂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Point);

impl Direction {
    pub const UNIT_TOLERANCE: f64 = 1e-12;

    /// Accepts `v` only if it already has unit norm.
    pub fn new(v: Point) -> Result<Self, GeometryError> {
        let n = v.norm();
        if (n - 1.0).abs() > Self::UNIT_TOLERANCE {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(Self(v))
    }

    pub fn normalized(v: Point) -> Result<Self, GeometryError> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self(v.scale(1.0 / n)))
    }

    /// 2D direction at `deg` degrees from the positive x₁ axis.
    pub fn from_angle_deg(deg: f64) -> Self {
        let r = deg.to_radians();
        Self(Point::new2(r.cos(), r.sin()))
    }

    /// `n` directions on the open upper unit hemisphere from a Fibonacci lattice.
    pub fn fibonacci_hemisphere(n: usize) -> Vec<Direction> {
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                Direction::normalized(Point::new3(r * phi.cos(), r * phi.sin(), z)).expect("lattice point is nonzero")
            })
            .collect()
    }

    pub fn as_point(&self) -> &Point {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn dot(&self, p: &Point) -> f64 {
        self.0.dot(p)
    }

    pub fn neg(&self) -> Direction {
        Direction(self.0.scale(-1.0))
    }

    pub fn approx_eq(&self, other: &Direction, tol: f64) -> bool {
        self.dim() == other.dim() && self.0.distance(&other.0) <= tol
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Direction::new(Point::from_slice(&v)?)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Self {
        d.0.into()
    }
}

/// Closed interval of projections x̂·y over a shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ProjectionInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn shifted(&self, d: f64) -> Self {
        Self { lo: self.lo + d, hi: self.hi + d }
    }

    /// Interval for the opposite direction: (−hi, −lo).
    pub fn negated(&self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }
}

/// Source support shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Disk in 2D, ball in 3D.
    #[serde(alias = "ball", alias = "disk_or_ball")]
    Disk { center: Point, radius: f64 },
    /// Kite `(cos θ + 0.65 cos 2θ − 0.65, 1.5 sin θ)`, scaled about `center`.
    Kite { center: Point, scale: f64 },
    /// Axis-aligned square with quarter-circle corners.
    RoundedSquare { center: Point, half_width: f64, corner_radius: f64 },
}

const BOUNDARY_SAMPLES: usize = 4096;

fn kite_boundary_point(theta: f64) -> (f64, f64) {
    (theta.cos() + 0.65 * (2.0 * theta).cos() - 0.65, 1.5 * theta.sin())
}

/// Unit-scale kite boundary polygon, sampled once.
fn kite_polygon() -> &'static [(f64, f64)] {
    static POLY: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    POLY.get_or_init(|| {
        (0..BOUNDARY_SAMPLES).map(|k| kite_boundary_point(2.0 * PI * k as f64 / BOUNDARY_SAMPLES as f64)).collect()
    })
}

fn kite_extent(samples: usize, dir: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..samples {
        let (x, y) = kite_boundary_point(2.0 * PI * k as f64 / samples as f64);
        let p = dir.0 * x + dir.1 * y;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

// even-odd rule
fn point_in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl Shape {
    pub fn disk(center: Point, radius: f64) -> Self {
        Shape::Disk { center, radius }
    }

    pub fn kite(center: Point, scale: f64) -> Self {
        Shape::Kite { center, scale }
    }

    pub fn rounded_square(center: Point, half_width: f64, corner_radius: f64) -> Self {
        Shape::RoundedSquare { center, half_width, corner_radius }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Shape::Disk { radius, .. } if !(*radius > 0.0) => {
                Err(GeometryError::InvalidShape(format!("radius must be positive, got {radius}")))
            }
            Shape::Kite { center, scale } => {
                center.check_dim(2)?;
                if *scale > 0.0 {
                    Ok(())
                } else {
                    Err(GeometryError::InvalidShape(format!("kite scale must be positive, got {scale}")))
                }
            }
            Shape::RoundedSquare { center, half_width, corner_radius } => {
                center.check_dim(2)?;
                if !(*half_width > 0.0) {
                    return Err(GeometryError::InvalidShape(format!("half_width must be positive, got {half_width}")));
                }
                if !(*corner_radius >= 0.0 && corner_radius <= half_width) {
                    return Err(GeometryError::InvalidShape(format!(
                        "corner_radius must lie in [0, half_width], got {corner_radius}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Disk { .. } => "disk",
            Shape::Kite { .. } => "kite",
            Shape::RoundedSquare { .. } => "rounded_square",
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Shape::Disk { center, .. } | Shape::Kite { center, .. } | Shape::RoundedSquare { center, .. } => *center,
        }
    }

    pub fn dim(&self) -> usize {
        self.center().dim()
    }

    /// The same shape with its reference center moved to `at`.
    pub fn placed_at(&self, at: Point) -> Shape {
        let mut s = self.clone();
        match &mut s {
            Shape::Disk { center, .. } | Shape::Kite { center, .. } | Shape::RoundedSquare { center, .. } => {
                *center = at
            }
        }
        s
    }

    pub fn translated(&self, d: &Point) -> Shape {
        self.placed_at(self.center().add(d))
    }

    /// Closed-region membership.
    pub fn contains(&self, p: &Point) -> Result<bool, GeometryError> {
        p.check_dim(self.dim())?;
        Ok(self.contains_unchecked(p))
    }

    fn contains_unchecked(&self, p: &Point) -> bool {
        match self {
            Shape::Disk { center, radius } => p.sub(center).dot(&p.sub(center)) <= radius * radius,
            Shape::Kite { center, scale } => {
                let q = p.sub(center).scale(1.0 / scale);
                // cheap reject outside the unit-scale bounding box
                if q.x() < -1.5 || q.x() > 1.0 + 1e-12 || q.y().abs() > 1.5 + 1e-12 {
                    return false;
                }
                point_in_polygon(kite_polygon(), q.x(), q.y())
            }
            Shape::RoundedSquare { center, half_width, corner_radius } => {
                let q = p.sub(center);
                let inner = half_width - corner_radius;
                let dx = (q.x().abs() - inner).max(0.0);
                let dy = (q.y().abs() - inner).max(0.0);
                q.x().abs() <= *half_width
                    && q.y().abs() <= *half_width
                    && dx * dx + dy * dy <= corner_radius * corner_radius
            }
        }
    }

    /// Axis-aligned box containing the shape.
    pub fn bounding_box(&self) -> (Point, Point) {
        let c = self.center();
        match self {
            Shape::Disk { radius, .. } => {
                let r = Point { coords: [*radius; 3], dim: c.dim() };
                (c.sub(&r), c.add(&r))
            }
            Shape::Kite { scale, .. } => {
                let (xlo, xhi) = kite_extent(BOUNDARY_SAMPLES, (1.0, 0.0));
                let (ylo, yhi) = kite_extent(BOUNDARY_SAMPLES, (0.0, 1.0));
                // pad by a hair so the sampled extent never clips the true curve
                let pad = 1e-3;
                (
                    Point::new2(c.x() + scale * (xlo - pad), c.y() + scale * (ylo - pad)),
                    Point::new2(c.x() + scale * (xhi + pad), c.y() + scale * (yhi + pad)),
                )
            }
            Shape::RoundedSquare { half_width, .. } => (
                Point::new2(c.x() - half_width, c.y() - half_width),
                Point::new2(c.x() + half_width, c.y() + half_width),
            ),
        }
    }

    /// Diameter (exact for disks and rounded squares, sampled for the kite).
    pub fn diameter(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::RoundedSquare { half_width, corner_radius, .. } => {
                let inner = half_width - corner_radius;
                2.0 * (2.0f64.sqrt() * inner + corner_radius)
            }
            Shape::Kite { scale, .. } => {
                // diameter = max over directions of the projected width
                let n = 720;
                (0..n)
                    .map(|k| {
                        let a = PI * k as f64 / n as f64;
                        let (lo, hi) = kite_extent(BOUNDARY_SAMPLES, (a.cos(), a.sin()));
                        hi - lo
                    })
                    .fold(0.0, f64::max)
                    * scale
            }
        }
    }

    /// `(inf x̂·y, sup x̂·y)` over the shape.
    pub fn projection_interval(&self, dir: &Direction) -> Result<ProjectionInterval, GeometryError> {
        dir.as_point().check_dim(self.dim())?;
        let c = self.center();
        let pc = dir.dot(&c);
        match self {
            Shape::Disk { radius, .. } => Ok(ProjectionInterval { lo: pc - radius, hi: pc + radius }),
            Shape::RoundedSquare { half_width, corner_radius, .. } => {
                // support function of (inner square ⊕ disk)
                let d = dir.as_point();
                let h = (half_width - corner_radius) * (d.x().abs() + d.y().abs()) + corner_radius;
                Ok(ProjectionInterval { lo: pc - h, hi: pc + h })
            }
            Shape::Kite { scale, .. } => {
                let d = dir.as_point();
                let coarse = kite_extent(BOUNDARY_SAMPLES, (d.x(), d.y()));
                let fine = kite_extent(2 * BOUNDARY_SAMPLES, (d.x(), d.y()));
                let (wc, wf) = (coarse.1 - coarse.0, fine.1 - fine.0);
                if (wc - wf).abs() * scale >= 1e-3 {
                    return Err(GeometryError::UnresolvedProjection {
                        shape: "kite",
                        coarse: wc * scale,
                        fine: wf * scale,
                    });
                }
                Ok(ProjectionInterval { lo: pc + scale * fine.0, hi: pc + scale * fine.1 })
            }
        }
    }

    /// Masked midpoint rule: cell centers of a `pts_per_axis`-per-axis grid over
    /// the bounding box, kept when inside the shape, each weighted by the cell measure.
    pub fn quadrature_points(&self, pts_per_axis: usize) -> Result<Vec<(Point, f64)>, GeometryError> {
        if pts_per_axis < 4 {
            return Err(GeometryError::TooFewPoints(pts_per_axis));
        }
        let (lo, hi) = self.bounding_box();
        let grid = SamplingGrid::new(lo, hi, vec![pts_per_axis; self.dim()])?;
        let w = grid.cell_volume();
        Ok(grid.cell_centers().filter(|p| self.contains_unchecked(p)).map(|p| (p, w)).collect())
    }
}

/// Source trajectory a(t), defined on `[0, t_end]`.
///
/// Serialized flat, e.g. `{"kind": "cardioid"}` or
/// `{"kind": "fixed", "point": [0, 0]}`, with an optional `t_end` overriding
/// the catalog domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRepr", into = "TrajectoryRepr")]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryKind {
    Fixed {
        point: Point,
    },
    /// `(8 sin³(πt/40), 6 cos(πt/40) − 2 cos(2πt/40) − cos(3πt/40) − 0.5 cos(4πt/40))`
    Cardioid,
    /// `8 cos(3πt/40) (cos(πt/40), sin(πt/40))`
    Trifolium,
    /// `7 (cos³(πt/40), sin³(πt/40))`
    Star,
    /// `(t − 8, 4 sin(π(t − 8)/8 + π))`
    SineLine,
    /// `(cos(t/4), t/12 − 5, sin(t/4))`
    Helix,
    /// `velocity · t`
    Linear {
        velocity: Point,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TrajectoryTag {
    Fixed,
    Cardioid,
    Trifolium,
    Star,
    SineLine,
    Helix,
    Linear,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryRepr {
    kind: TrajectoryTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    velocity: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
}

impl TryFrom<TrajectoryRepr> for Trajectory {
    type Error = String;

    fn try_from(r: TrajectoryRepr) -> Result<Self, String> {
        let kind = match (r.kind, r.point, r.velocity) {
            (TrajectoryTag::Fixed, Some(point), None) => TrajectoryKind::Fixed { point },
            (TrajectoryTag::Fixed, _, _) => return Err("`fixed` trajectory takes exactly a `point`".into()),
            (TrajectoryTag::Linear, None, Some(velocity)) => TrajectoryKind::Linear { velocity },
            (TrajectoryTag::Linear, _, _) => return Err("`linear` trajectory takes exactly a `velocity`".into()),
            (_, Some(_), _) | (_, _, Some(_)) => {
                return Err("catalog trajectories take no `point` or `velocity`".into())
            }
            (TrajectoryTag::Cardioid, None, None) => TrajectoryKind::Cardioid,
            (TrajectoryTag::Trifolium, None, None) => TrajectoryKind::Trifolium,
            (TrajectoryTag::Star, None, None) => TrajectoryKind::Star,
            (TrajectoryTag::SineLine, None, None) => TrajectoryKind::SineLine,
            (TrajectoryTag::Helix, None, None) => TrajectoryKind::Helix,
        };
        let mut t = Trajectory::new(kind);
        if let Some(end) = r.t_end {
            if !(end > 0.0) {
                return Err(format!("t_end must be positive, got {end}"));
            }
            t.t_end = end;
        }
        Ok(t)
    }
}

impl From<Trajectory> for TrajectoryRepr {
    fn from(t: Trajectory) -> Self {
        let natural = Trajectory::new(t.kind.clone()).t_end;
        let t_end = (t.t_end != natural && t.t_end.is_finite()).then_some(t.t_end);
        let (kind, point, velocity) = match t.kind {
            TrajectoryKind::Fixed { point } => (TrajectoryTag::Fixed, Some(point), None),
            TrajectoryKind::Linear { velocity } => (TrajectoryTag::Linear, None, Some(velocity)),
            TrajectoryKind::Cardioid => (TrajectoryTag::Cardioid, None, None),
            TrajectoryKind::Trifolium => (TrajectoryTag::Trifolium, None, None),
            TrajectoryKind::Star => (TrajectoryTag::Star, None, None),
            TrajectoryKind::SineLine => (TrajectoryTag::SineLine, None, None),
            TrajectoryKind::Helix => (TrajectoryTag::Helix, None, None),
        };
        TrajectoryRepr { kind, point, velocity, t_end }
    }
}

impl Trajectory {
    /// Trajectory with the natural time domain of its catalog entry.
    pub fn new(kind: TrajectoryKind) -> Self {
        let t_end = match kind {
            TrajectoryKind::Cardioid | TrajectoryKind::Trifolium | TrajectoryKind::Star => 80.0,
            TrajectoryKind::SineLine => 16.0,
            TrajectoryKind::Helix => 120.0,
            TrajectoryKind::Fixed { .. } | TrajectoryKind::Linear { .. } => f64::INFINITY,
        };
        Self { kind, t_end }
    }

    pub fn fixed(p: Point) -> Self {
        Self::new(TrajectoryKind::Fixed { point: p })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            TrajectoryKind::Fixed { point } => point.dim(),
            TrajectoryKind::Linear { velocity } => velocity.dim(),
            TrajectoryKind::Helix => 3,
            _ => 2,
        }
    }

    pub fn position(&self, t: f64) -> Result<Point, GeometryError> {
        if !(0.0..=self.t_end).contains(&t) {
            return Err(GeometryError::TimeOutOfRange { t, end: self.t_end });
        }
        Ok(self.eval(t))
    }

    fn eval(&self, t: f64) -> Point {
        let w = PI / 40.0;
        match &self.kind {
            TrajectoryKind::Fixed { point } => *point,
            TrajectoryKind::Cardioid => Point::new2(
                8.0 * (w * t).sin().powi(3),
                6.0 * (w * t).cos() - 2.0 * (2.0 * w * t).cos() - (3.0 * w * t).cos() - 0.5 * (4.0 * w * t).cos(),
            ),
            TrajectoryKind::Trifolium => {
                let r = 8.0 * (3.0 * w * t).cos();
                Point::new2(r * (w * t).cos(), r * (w * t).sin())
            }
            TrajectoryKind::Star => Point::new2(7.0 * (w * t).cos().powi(3), 7.0 * (w * t).sin().powi(3)),
            TrajectoryKind::SineLine => Point::new2(t - 8.0, 4.0 * (PI / 8.0 * (t - 8.0) + PI).sin()),
            TrajectoryKind::Helix => Point::new3((t / 4.0).cos(), t / 12.0 - 5.0, (t / 4.0).sin()),
            TrajectoryKind::Linear { velocity } => velocity.scale(t),
        }
    }

    /// Largest |a′(t)| over `samples` forward differences on the time domain
    /// (or on `[0, horizon]` when the domain is unbounded).
    pub fn max_speed(&self, horizon: f64, samples: usize) -> f64 {
        let end = if self.t_end.is_finite() { self.t_end } else { horizon };
        let dt = end / samples as f64;
        (0..samples)
            .map(|k| {
                let t = k as f64 * dt;
                self.eval(t + dt).distance(&self.eval(t)) / dt
            })
            .fold(0.0, f64::max)
    }
}

/// `true` iff `lo − c·t0 + c·η < x̂·y < hi − c·t0 + c·η` (strict).
pub fn in_strip(y: &Point, dir: &Direction, proj: &ProjectionInterval, eta: f64, t0: f64, c: f64) -> bool {
    let p = dir.dot(y);
    let shift = c * (eta - t0);
    proj.lo + shift < p && p < proj.hi + shift
}

/// Regular grid of cells over an axis-aligned box; samples at cell centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingGrid {
    #[serde(alias = "box_min")]
    pub min: Point,
    #[serde(alias = "box_max")]
    pub max: Point,
    pub resolution: Vec<usize>,
}

impl SamplingGrid {
    pub fn new(min: Point, max: Point, resolution: Vec<usize>) -> Result<Self, GeometryError> {
        let g = Self { min, max, resolution };
        g.validate()?;
        Ok(g)
    }

    /// Square (cubic) grid `[lo, hi]^dim` with `n` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self, GeometryError> {
        let min = Point::from_slice(&vec![lo; dim])?;
        let max = Point::from_slice(&vec![hi; dim])?;
        Self::new(min, max, vec![n; dim])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let d = self.min.dim();
        self.max.check_dim(d)?;
        if self.resolution.len() != d {
            return Err(GeometryError::InvalidGrid(format!(
                "resolution has {} entries for a {d}-dimensional box",
                self.resolution.len()
            )));
        }
        for a in 0..d {
            if !(self.min.coords()[a] < self.max.coords()[a]) {
                return Err(GeometryError::InvalidGrid(format!("box_min must be < box_max on axis {a}")));
            }
            if self.resolution[a] == 0 {
                return Err(GeometryError::InvalidGrid(format!("zero resolution on axis {a}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.dim()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.max.coords()[axis] - self.min.coords()[axis]) / self.resolution[axis] as f64
    }

    /// Largest cell width over all axes.
    pub fn max_cell_width(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    /// Circumradius of the box about the origin.
    pub fn circumradius(&self) -> f64 {
        (0..self.dim())
            .map(|a| {
                let m = self.min.coords()[a].abs().max(self.max.coords()[a].abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Center of the cell with flat row-major index `idx` (first axis slowest).
    pub fn cell_center(&self, idx: usize) -> Point {
        let d = self.dim();
        let mut c = [0.0; 3];
        let mut rem = idx;
        for a in (0..d).rev() {
            let n = self.resolution[a];
            let i = rem % n;
            rem /= n;
            c[a] = self.min.coords()[a] + (i as f64 + 0.5) * self.cell_width(a);
        }
        Point { coords: c, dim: d }
    }

    pub fn cell_centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.cell_center(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disk() -> Shape {
        Shape::disk(Point::new2(0.0, 0.0), 1.0)
    }

    #[test]
    fn disk_membership() {
        assert!(unit_disk().contains(&Point::new2(0.5, 0.0)).unwrap());
        assert!(!unit_disk().contains(&Point::new2(2.0, 0.0)).unwrap());
        assert!(unit_disk().contains(&Point::new2(1.0, 0.0)).unwrap());
    }

    #[test]
    fn membership_rejects_wrong_dimension() {
        let err = unit_disk().contains(&Point::new3(0.0, 0.0, 0.0)).unwrap_err();
        assert_eq!(err, GeometryError::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn kite_center_is_inside() {
        // The parametrization origin lies strictly inside the curve: along the
        // x₁ axis the boundary crosses at x₁ = 1 and, inside the notch, x₁ = −1.
        let kite = Shape::kite(Point::new2(0.3, -0.2), 1.0);
        assert!(kite.contains(&Point::new2(0.3, -0.2)).unwrap());
        assert!(kite.contains(&Point::new2(0.3 + 0.99, -0.2)).unwrap());
        assert!(!kite.contains(&Point::new2(0.3 + 1.01, -0.2)).unwrap());
        assert!(kite.contains(&Point::new2(0.3 - 0.99, -0.2)).unwrap());
        assert!(!kite.contains(&Point::new2(0.3 - 1.01, -0.2)).unwrap());
        // off the axis the lobes extend further left (x₁ ≈ −1.27 at x₂ = 0.9)
        assert!(kite.contains(&Point::new2(0.3 - 1.2, -0.2 + 0.9)).unwrap());
    }

    #[test]
    fn rounded_square_corners_are_cut() {
        let s = Shape::rounded_square(Point::new2(0.0, 0.0), 1.0, 0.3);
        assert!(s.contains(&Point::new2(0.99, 0.0)).unwrap());
        assert!(!s.contains(&Point::new2(0.99, 0.99)).unwrap());
        assert!(s.contains(&Point::new2(0.7 + 0.2, 0.7 + 0.2)).unwrap());
    }

    #[test]
    fn disk_quadrature_area() {
        let pts = unit_disk().quadrature_points(400).unwrap();
        let area: f64 = pts.iter().map(|(_, w)| w).sum();
        assert!((area - PI).abs() < 1e-3, "area {area}");
    }

    #[test]
    fn quadrature_error_shrinks_on_average_with_refinement() {
        // Masked midpoint errors oscillate with resolution, so compare mean
        // errors over small windows around 8 and 16 points per axis.
        let err = |p: usize| {
            let a: f64 = unit_disk().quadrature_points(p).unwrap().iter().map(|(_, w)| w).sum();
            (a - PI).abs()
        };
        let coarse: f64 = (6..=10).map(err).sum::<f64>() / 5.0;
        let fine: f64 = (14..=18).map(err).sum::<f64>() / 5.0;
        assert!(fine < coarse, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn small_ball_volume() {
        let ball = Shape::disk(Point::new3(0.0, 0.0, 0.0), 0.1);
        let vol: f64 = ball.quadrature_points(40).unwrap().iter().map(|(_, w)| w).sum();
        let exact = 4.0 / 3.0 * PI * 1e-3;
        assert!((vol - exact).abs() / exact < 0.05);
    }

    #[test]
    fn quadrature_requires_four_points() {
        assert_eq!(unit_disk().quadrature_points(3).unwrap_err(), GeometryError::TooFewPoints(3));
    }

    #[test]
    fn disk_projection_intervals() {
        let d = Shape::disk(Point::new2(2.0, 0.0), 1.0);
        let p = d.projection_interval(&Direction::from_angle_deg(0.0)).unwrap();
        assert_eq!((p.lo, p.hi), (1.0, 3.0));
        let p = d.projection_interval(&Direction::new(Point::new2(0.0, 1.0)).unwrap()).unwrap();
        assert_eq!((p.lo, p.hi), (-1.0, 1.0));
    }

    #[test]
    fn kite_projection_is_resolved() {
        let kite = Shape::kite(Point::new2(0.0, 0.0), 1.0);
        let p = kite.projection_interval(&Direction::from_angle_deg(0.0)).unwrap();
        // extent along x₁ from the dense sampling oracle
        assert!((p.hi - 1.0).abs() < 1e-9);
        let (lo, hi) = kite_extent(1 << 16, (1.0, 0.0));
        assert!((p.width() - (hi - lo)).abs() < 1e-3);
    }

    #[test]
    fn rounded_square_projection_matches_boundary_sampling() {
        let s = Shape::rounded_square(Point::new2(0.5, -1.0), 1.2, 0.4);
        for deg in [0.0, 17.0, 45.0, 100.0, 260.0] {
            let dir = Direction::from_angle_deg(deg);
            let analytic = s.projection_interval(&dir).unwrap();
            let pts = s.quadrature_points(400).unwrap();
            let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| {
                let v = dir.dot(p);
                (lo.min(v), hi.max(v))
            });
            let cell = 2.4 / 400.0;
            assert!(analytic.lo <= lo && lo - analytic.lo < cell, "{deg}: {analytic:?} vs {lo}");
            assert!(analytic.hi >= hi && analytic.hi - hi < cell, "{deg}: {analytic:?} vs {hi}");
        }
    }

    #[test]
    fn strip_membership() {
        let proj = unit_disk().projection_interval(&Direction::from_angle_deg(0.0)).unwrap();
        let x = Direction::from_angle_deg(0.0);
        let t0 = 4.0;
        assert!(in_strip(&Point::new2(0.0, 0.0), &x, &proj, t0, t0, 1.0));
        assert!(!in_strip(&Point::new2(0.0, 0.0), &x, &proj, t0 + 3.0, t0, 1.0));
        assert!(in_strip(&Point::new2(3.0, 0.0), &x, &proj, t0 + 3.0, t0, 1.0));
        // boundaries are excluded
        assert!(!in_strip(&Point::new2(1.0, 0.0), &x, &proj, t0, t0, 1.0));
    }

    #[test]
    fn catalog_positions() {
        let p = Trajectory::new(TrajectoryKind::Cardioid).position(0.0).unwrap();
        assert!((p.x() - 0.0).abs() < 1e-15 && (p.y() - 2.5).abs() < 1e-15);
        let p = Trajectory::new(TrajectoryKind::Star).position(20.0).unwrap();
        assert!(p.x().abs() < 1e-12 && (p.y() - 7.0).abs() < 1e-12);
        let p = Trajectory::new(TrajectoryKind::Helix).position(0.0).unwrap();
        assert_eq!(p.coords(), &[1.0, -5.0, 0.0]);
    }

    #[test]
    fn position_outside_domain_is_an_error() {
        let traj = Trajectory::new(TrajectoryKind::SineLine);
        assert!(matches!(traj.position(16.5), Err(GeometryError::TimeOutOfRange { .. })));
        assert!(traj.position(-0.1).is_err());
    }

    #[test]
    fn direction_requires_unit_norm() {
        assert!(Direction::new(Point::new2(1.0, 1.0)).is_err());
        let d = Direction::normalized(Point::new2(1.0, 1.0)).unwrap();
        assert!((d.as_point().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hemisphere_lattice_is_upper_and_unit() {
        let dirs = Direction::fibonacci_hemisphere(10);
        assert_eq!(dirs.len(), 10);
        for d in dirs {
            assert!(d.as_point().z() > 0.0);
            assert!((d.as_point().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_cell_centers_are_row_major() {
        let g = SamplingGrid::cube(2, -1.0, 1.0, 2).unwrap();
        let c: Vec<_> = g.cell_centers().map(|p| (p.x(), p.y())).collect();
        assert_eq!(c, vec![(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]);
    }

    #[test]
    fn grid_rejects_inverted_box() {
        assert!(SamplingGrid::new(Point::new2(1.0, 0.0), Point::new2(0.0, 1.0), vec![2, 2]).is_err());
    }

    #[test]
    fn trajectory_serde() {
        let t: Trajectory = serde_json::from_str(r#"{"kind": "sine_line"}"#).unwrap();
        assert_eq!(t.t_end, 16.0);
        let t: Trajectory = serde_json::from_str(r#"{"kind": "fixed", "point": [1, 2]}"#).unwrap();
        assert_eq!(t.position(1e6).unwrap(), Point::new2(1.0, 2.0));
        let back: Trajectory = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<Trajectory>(r#"{"kind": "star", "point": [1, 2]}"#).is_err());
        assert!(serde_json::from_str::<Trajectory>(r#"{"kind": "star", "speed": 2}"#).is_err());
        let t: Trajectory = serde_json::from_str(r#"{"kind": "helix", "t_end": 60}"#).unwrap();
        assert!(t.position(61.0).is_err());
    }

    #[test]
    fn point_serde_roundtrip() {
        let p: Point = serde_json::from_str("[1.0, 2.0, 3.0]").unwrap();
        assert_eq!(p, Point::new3(1.0, 2.0, 3.0));
        assert!(serde_json::from_str::<Point>("[1.0]").is_err());
    }
}
