//! Planar geometry primitives: points, rigid poses, polylines, and simple
//! polygons. Everything is in meters; angles are radians.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::GeometryError;

/// Two points closer than this are considered coincident.
pub const COINCIDENT_TOL: f64 = 1e-9;

/// A point (or displacement) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, treating both points as vectors.
    pub fn cross(&self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (*self - other).norm()
    }

    pub fn distance_sq(&self, other: Point2) -> f64 {
        let d = *self - other;
        d.x * d.x + d.y * d.y
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], y: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = angle % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// A rigid motion mapping local coordinates into world coordinates:
/// `world = R(rotation) * local + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Point2,
    pub rotation: f64,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Point2::new(0.0, 0.0),
            rotation: 0.0,
        }
    }

    pub fn new(translation: Point2, rotation: f64) -> Self {
        Self {
            translation,
            rotation: normalize_angle(rotation),
        }
    }

    /// Local -> world.
    pub fn apply(&self, p: Point2) -> Point2 {
        let (s, c) = self.rotation.sin_cos();
        Point2::new(
            c * p.x - s * p.y + self.translation.x,
            s * p.x + c * p.y + self.translation.y,
        )
    }

    /// World -> local.
    pub fn apply_inverse(&self, p: Point2) -> Point2 {
        let (s, c) = self.rotation.sin_cos();
        let d = p - self.translation;
        Point2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

/// Distance from `p` to the segment `a`-`b`.
pub fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    dist_sq_point_segment(p, a, b).sqrt()
}

pub fn dist_sq_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len_sq = ab.dot(ab);
    if len_sq <= 0.0 {
        return p.distance_sq(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance_sq(a + ab * t)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Segment count that keeps pieces at most `spacing` long. The relative
/// slack stops fp noise from splitting segments that are already exact
/// multiples, which keeps resampling idempotent.
fn subdivisions(len: f64, spacing: f64) -> usize {
    ((len / spacing) * (1.0 - 1e-9)).ceil().max(1.0) as usize
}

/// True when the closed segments `p1`-`p2` and `p3`-`p4` share any point.
pub fn segments_intersect(p1: Point2, p2: Point2, p3: Point2, p4: Point2) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, a: Point2, b: Point2, q: Point2| -> bool {
        d == 0.0
            && q.x >= a.x.min(b.x)
            && q.x <= a.x.max(b.x)
            && q.y >= a.y.min(b.y)
            && q.y <= a.y.max(b.y)
    };
    on(d1, p3, p4, p1) || on(d2, p3, p4, p2) || on(d3, p1, p2, p3) || on(d4, p1, p2, p4)
}

/// Open chain of at least two pairwise non-coincident consecutive points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polyline {
    points: Vec<Point2>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        for p in &points {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite);
            }
        }
        for w in points.windows(2) {
            if w[0].distance(w[1]) <= COINCIDENT_TOL {
                return Err(GeometryError::CoincidentPoints);
            }
        }
        Ok(Self { points })
    }

    /// Builds a polyline after merging consecutive coincident points.
    pub fn new_dedup(points: Vec<Point2>) -> Result<Self, GeometryError> {
        let mut out: Vec<Point2> = Vec::with_capacity(points.len());
        for p in points {
            if out.last().is_none_or(|q| q.distance(p) > COINCIDENT_TOL) {
                out.push(p);
            }
        }
        Self::new(out)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn first(&self) -> Point2 {
        self.points[0]
    }

    pub fn last(&self) -> Point2 {
        *self.points.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Subdivides every segment so consecutive gaps are at most `spacing`
    /// (up to fp rounding). Original vertices (and hence the exact shape and
    /// arc length) are kept.
    pub fn resample(&self, spacing: f64) -> Polyline {
        assert!(spacing > 0.0, "spacing must be positive");
        let mut out = Vec::with_capacity(self.points.len());
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = a.distance(b);
            let parts = subdivisions(len, spacing);
            for i in 0..parts {
                let t = i as f64 / parts as f64;
                out.push(a + (b - a) * t);
            }
        }
        out.push(self.last());
        Polyline { points: out }
    }

    /// Applies `f` to every vertex. The caller keeps the non-coincidence
    /// invariant (true for the rigid and shear-like maps used here).
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Polyline {
        Polyline {
            points: self.points.iter().copied().map(&f).collect(),
        }
    }

    pub fn distance_to_point(&self, p: Point2) -> f64 {
        self.points
            .windows(2)
            .map(|w| dist_point_segment(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<Point2>> for Polyline {
    type Error = GeometryError;
    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        Polyline::new_dedup(v)
    }
}

impl From<Polyline> for Vec<Point2> {
    fn from(p: Polyline) -> Self {
        p.points
    }
}

/// Closed ring of vertices. The closing edge (last -> first) is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub points: Vec<Point2>,
}

impl Polygon {
    pub fn new(mut points: Vec<Point2>) -> Result<Self, GeometryError> {
        // Tolerate an explicitly repeated first vertex.
        if points.len() > 1 && points[0].distance(*points.last().unwrap()) <= COINCIDENT_TOL {
            points.pop();
        }
        if points.len() < 3 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        for p in &points {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite);
            }
        }
        Ok(Self { points })
    }

    fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Boundary-inclusive membership test (winding number plus an explicit
    /// on-edge check with tolerance `COINCIDENT_TOL`).
    pub fn contains(&self, p: Point2) -> bool {
        let tol_sq = COINCIDENT_TOL * COINCIDENT_TOL;
        for (a, b) in self.edges() {
            if dist_sq_point_segment(p, a, b) <= tol_sq {
                return true;
            }
        }
        self.winding_number(p) != 0
    }

    fn winding_number(&self, p: Point2) -> i32 {
        let mut wn = 0i32;
        for (a, b) in self.edges() {
            if a.y <= p.y {
                if b.y > p.y && orient(a, b, p) > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && orient(a, b, p) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    /// True when no two non-adjacent edges touch. Edges are swept in x so the
    /// check stays near-linear for elongated rings.
    pub fn is_simple(&self) -> bool {
        let n = self.points.len();
        if n < 3 {
            return false;
        }
        let mut order: Vec<usize> = (0..n).collect();
        let min_x = |i: usize| {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            a.x.min(b.x)
        };
        let max_x = |i: usize| {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            a.x.max(b.x)
        };
        order.sort_by(|&i, &j| min_x(i).partial_cmp(&min_x(j)).unwrap());

        let mut active: Vec<usize> = Vec::new();
        for &i in &order {
            let lo = min_x(i);
            active.retain(|&j| max_x(j) >= lo);
            for &j in &active {
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    continue;
                }
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                let (c, d) = (self.points[j], self.points[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
            active.push(i);
        }
        true
    }

    /// Subdivides every edge (including the closing one) to at most `max_edge`.
    pub fn densify(&self, max_edge: f64) -> Polygon {
        assert!(max_edge > 0.0);
        let n = self.points.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            let len = a.distance(b);
            let parts = subdivisions(len, max_edge);
            for k in 0..parts {
                let t = k as f64 / parts as f64;
                out.push(a + (b - a) * t);
            }
        }
        Polygon { points: out }
    }

    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Polygon {
        Polygon {
            points: self.points.iter().copied().map(&f).collect(),
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn empty() -> Self {
        Self {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn include(&mut self, p: Point2) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn include_all<'a>(&mut self, pts: impl IntoIterator<Item = &'a Point2>) {
        for p in pts {
            self.include(*p);
        }
    }

    pub fn width(&self) -> f64 {
        (self.max_x - self.min_x).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.max_y - self.min_y).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x
    }
}
