//! Planar geometry shared by the simulator.
//!
//! The access point sits at the origin of the frame, so most predicates here
//! are phrased relative to the origin: [`theta_of`] gives the direction of a
//! point as seen from the AP and [`AngularRange`] is the arc a segment
//! subtends at the AP.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::SimError;

/// Absolute tolerance for geometric predicates, in meters.
pub const GEOM_TOL: f64 = 1e-9;
/// Tolerance for comparing angles modulo 2π.
pub const ANGLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Point at distance `r` from the origin in direction `angle`.
    pub fn polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Infinite line in slope-intercept form `y = a x + b`, or the vertical line
/// `x = c` that the slope form cannot express.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Line2 {
    Sloped { a: f64, b: f64 },
    Vertical { x: f64 },
}

/// Slopes steeper than this are treated as vertical when a line is built from
/// two points; beyond it the intercept loses most of its precision.
const MAX_SLOPE: f64 = 1e9;

impl Line2 {
    /// Line through two points. `None` when the points coincide.
    pub fn through(p: Point2, q: Point2) -> Option<Line2> {
        let dx = q.x - p.x;
        let dy = q.y - p.y;
        if dx.abs() <= GEOM_TOL && dy.abs() <= GEOM_TOL {
            return None;
        }
        if dx == 0.0 || (dy / dx).abs() > MAX_SLOPE {
            return Some(Line2::Vertical { x: 0.5 * (p.x + q.x) });
        }
        let a = dy / dx;
        Some(Line2::Sloped { a, b: -a * p.x + p.y })
    }

    /// Line with the same direction as `self` passing through `p`.
    pub fn parallel_through(&self, p: Point2) -> Line2 {
        match *self {
            Line2::Sloped { a, .. } => Line2::Sloped { a, b: -a * p.x + p.y },
            Line2::Vertical { .. } => Line2::Vertical { x: p.x },
        }
    }

    /// Signed residual; zero exactly on the line.
    pub fn residual(&self, p: Point2) -> f64 {
        match *self {
            Line2::Sloped { a, b } => a * p.x + b - p.y,
            Line2::Vertical { x } => x - p.x,
        }
    }

    /// Euclidean distance from `p` to the line.
    pub fn distance(&self, p: Point2) -> f64 {
        match *self {
            Line2::Sloped { a, .. } => self.residual(p).abs() / a.hypot(1.0),
            Line2::Vertical { .. } => self.residual(p).abs(),
        }
    }

    /// Direction of the line as Θ(1/a, 1), in `[0, π)`. Horizontal lines give
    /// 0 (the limit of 2Θ(1/a, 1) mod 2π as a → 0) and vertical ones π/2.
    pub fn direction_angle(&self) -> f64 {
        match *self {
            Line2::Sloped { a: 0.0, .. } => 0.0,
            Line2::Sloped { a, .. } => theta(Point2::new(1.0 / a, 1.0)),
            Line2::Vertical { .. } => PI / 2.0,
        }
    }

    /// Unit direction vector with non-negative y (x > 0 for horizontal lines).
    pub fn unit_direction(&self) -> Point2 {
        let t = self.direction_angle();
        Point2::new(t.cos(), t.sin())
    }

    /// Parameter `t` such that `t·p` lies on the line: where the ray from the
    /// origin through `p` meets it, as a fraction of `|p|`. `None` if parallel.
    pub fn ray_parameter(&self, p: Point2) -> Option<f64> {
        let t = match *self {
            Line2::Sloped { a, b } => b / (p.y - a * p.x),
            Line2::Vertical { x } => x / p.x,
        };
        t.is_finite().then_some(t)
    }

    pub fn is_vertical(&self) -> bool {
        matches!(self, Line2::Vertical { .. })
    }

    /// `(a, b)` for sloped lines and `(+inf, x)` for vertical ones; the
    /// layout used by the plain-text surface files.
    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            Line2::Sloped { a, b } => (a, b),
            Line2::Vertical { x } => (f64::INFINITY, x),
        }
    }

    pub fn from_coefficients(a: f64, b: f64) -> Line2 {
        if a.is_infinite() {
            Line2::Vertical { x: b }
        } else {
            Line2::Sloped { a, b }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment2 {
    pub p1: Point2,
    pub p2: Point2,
    pub line: Line2,
}

impl Segment2 {
    pub fn new(p1: Point2, p2: Point2) -> Result<Self, SimError> {
        let line = Line2::through(p1, p2)
            .ok_or_else(|| SimError::Domain(format!("degenerate segment at {p1}")))?;
        Ok(Self { p1, p2, line })
    }

    /// Segment whose carrier line is given explicitly. The endpoints are
    /// expected to lie on `line` (within tolerance).
    pub fn on_line(p1: Point2, p2: Point2, line: Line2) -> Self {
        Self { p1, p2, line }
    }

    pub fn length(&self) -> f64 {
        self.p1.dist(self.p2)
    }

    pub fn midpoint(&self) -> Point2 {
        (self.p1 + self.p2).scale(0.5)
    }

    /// Same segment with endpoints ordered counter-clockwise as seen from the
    /// origin, so that `angular_range` spans the segment and not its
    /// complement.
    pub fn oriented_ccw(self) -> Self {
        if self.p1.cross(self.p2) < 0.0 {
            Self { p1: self.p2, p2: self.p1, line: self.line }
        } else {
            self
        }
    }
}

/// Half-open arcs `[start, end)` on `[0, 2π)` as seen from the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngularRange {
    /// Radially aligned segment (both endpoints at the same Θ).
    Empty,
    Arc { start: f64, end: f64 },
    /// `[start, 2π) ∪ [0, end)`.
    Wrapped { start: f64, end: f64 },
}

impl AngularRange {
    pub fn contains(&self, theta: f64) -> bool {
        match *self {
            AngularRange::Empty => false,
            AngularRange::Arc { start, end } => theta >= start && theta < end,
            AngularRange::Wrapped { start, end } => theta >= start || theta < end,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, AngularRange::Empty)
    }

    /// The arcs as `(start, end)` pairs.
    pub fn arcs(&self) -> Vec<(f64, f64)> {
        match *self {
            AngularRange::Empty => vec![],
            AngularRange::Arc { start, end } => vec![(start, end)],
            AngularRange::Wrapped { start, end } => vec![(start, TAU), (0.0, end)],
        }
    }

    /// Total angle covered.
    pub fn span(&self) -> f64 {
        self.arcs().iter().map(|(s, e)| e - s).sum()
    }
}

/// The angular function Θ of a point, in `[0, 2π)`.
pub fn theta_of(p: Point2) -> Result<f64, SimError> {
    if p.x == 0.0 && p.y == 0.0 {
        return Err(SimError::Domain("Θ is undefined at the origin".into()));
    }
    Ok(theta(p))
}

/// Unchecked Θ; returns 0 at the origin.
pub(crate) fn theta(p: Point2) -> f64 {
    let t = if p.x > 0.0 {
        (p.y / p.x).atan().rem_euclid(TAU)
    } else if p.x < 0.0 {
        (p.y / p.x).atan() + PI
    } else if p.y == 0.0 {
        0.0
    } else {
        PI - p.y / (2.0 * p.y.abs()) * PI
    };
    // rem_euclid of a tiny negative number rounds up to exactly 2π
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Difference of two angles wrapped into `(-π, π]`.
pub fn wrap_angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Angular range Ω subtended by a segment, using the endpoint order as given.
pub fn angular_range(s: &Segment2) -> Result<AngularRange, SimError> {
    let t1 = theta_of(s.p1)?;
    let t2 = theta_of(s.p2)?;
    Ok(range_between(t1, t2))
}

pub(crate) fn range_between(t1: f64, t2: f64) -> AngularRange {
    if wrap_angle_diff(t1, t2).abs() <= ANGLE_TOL {
        AngularRange::Empty
    } else if t1 < t2 {
        AngularRange::Arc { start: t1, end: t2 }
    } else {
        AngularRange::Wrapped { start: t1, end: t2 }
    }
}

/// Mirror image of `p` across `line`.
pub fn mirror_point(p: Point2, line: &Line2) -> Point2 {
    match *line {
        Line2::Sloped { a, b } => {
            let den = a * a + 1.0;
            Point2::new(
                ((1.0 - a * a) * p.x - 2.0 * a * b + 2.0 * a * p.y) / den,
                (2.0 * a * p.x + 2.0 * b - (1.0 - a * a) * p.y) / den,
            )
        }
        Line2::Vertical { x } => Point2::new(2.0 * x - p.x, p.y),
    }
}

/// Intersection of two lines; `None` for parallel lines.
pub fn line_intersection(l1: &Line2, l2: &Line2) -> Option<Point2> {
    match (*l1, *l2) {
        (Line2::Sloped { a: a1, b: b1 }, Line2::Sloped { a: a2, b: b2 }) => {
            if a1 == a2 {
                return None;
            }
            let d = a1 - a2;
            Some(Point2::new((-b1 + b2) / d, (a1 * b2 - a2 * b1) / d))
        }
        (Line2::Vertical { x }, Line2::Sloped { a, b })
        | (Line2::Sloped { a, b }, Line2::Vertical { x }) => Some(Point2::new(x, a * x + b)),
        (Line2::Vertical { .. }, Line2::Vertical { .. }) => None,
    }
}

/// Nearest intersection of the half-line from `origin` in direction
/// `dir_angle` with the closed segment `s`, with its distance.
pub fn ray_hits_segment(origin: Point2, dir_angle: f64, s: &Segment2) -> Option<(Point2, f64)> {
    let d = Point2::new(dir_angle.cos(), dir_angle.sin());
    let e = s.p2 - s.p1;
    let denom = d.cross(e);
    if denom.abs() < 1e-15 * e.norm() {
        return None;
    }
    let w = s.p1 - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(d) / denom;
    let u_tol = GEOM_TOL / e.norm();
    if t >= 0.0 && (-u_tol..=1.0 + u_tol).contains(&u) {
        Some((origin + d.scale(t), t))
    } else {
        None
    }
}

/// Whether the open segment `pq` crosses the segment `s`.
pub fn segment_blocks(p: Point2, q: Point2, s: &Segment2) -> bool {
    let r = q - p;
    let e = s.p2 - s.p1;
    let denom = r.cross(e);
    if denom == 0.0 {
        return false;
    }
    let w = s.p1 - p;
    let t = w.cross(e) / denom;
    let u = w.cross(r) / denom;
    t > 0.0 && t < 1.0 && (0.0..=1.0).contains(&u)
}
