//! Exact 2D primitives: points, simple polygons, ray casting and clearance.
//!
//! Angles are radians measured counterclockwise from +x, so a heading of
//! `FRAC_PI_2` faces +y ("north"). Boundary walls are treated exactly like
//! obstacle edges by every distance query.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environments::Environment;

/// Tolerance on intersection parameters and on-edge tests.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector for heading `theta`.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn closest_point(&self, p: Point) -> Point {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(d) / len2).clamp(0.0, 1.0);
        self.a + d * t
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        p.distance(self.closest_point(p))
    }

    /// True if the closed segments share at least one point.
    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_segment(o.a, o.b, self.a))
            || (d2 == 0.0 && on_segment(o.a, o.b, self.b))
            || (d3 == 0.0 && on_segment(self.a, self.b, o.a))
            || (d4 == 0.0 && on_segment(self.a, self.b, o.b))
    }

    /// True if the segments cross at a single point interior to both.
    pub fn crosses_properly(&self, o: &Segment) -> bool {
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }

    pub fn distance_to_segment(&self, o: &Segment) -> f64 {
        if self.intersects(o) {
            return 0.0;
        }
        self.distance_to_point(o.a)
            .min(self.distance_to_point(o.b))
            .min(o.distance_to_point(self.a))
            .min(o.distance_to_point(self.b))
    }

    /// Ray parameter `t` at which a ray from `origin` along unit `dir` meets
    /// this segment, or `None`. Parallel segments are skipped; the adjacent
    /// edges of a polygon catch a collinear graze at their shared vertex.
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        let e = self.b - self.a;
        let den = dir.cross(e);
        if den.abs() < 1e-15 {
            return None;
        }
        let w = self.a - origin;
        let t = w.cross(e) / den;
        let u = w.cross(dir) / den;
        if t >= -EPS && (-EPS..=1.0 + EPS).contains(&u) {
            Some(t.max(0.0))
        } else {
            None
        }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolygonError {
    #[error("polygon has {0} vertices, at least 3 are required")]
    Degenerate(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("vertices {0} and {1} coincide")]
    RepeatedVertex(usize, usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
}

/// A closed simple polygon. The closing edge from the last vertex back to
/// the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, PolygonError> {
        let n = vertices.len();
        if n < 3 {
            return Err(PolygonError::Degenerate(n));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(PolygonError::NonFinite(i));
        }
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(PolygonError::RepeatedVertex(i, (i + 1) % n));
            }
        }
        let poly = Self { vertices };
        poly.check_simple(false)?;
        if poly.signed_area().abs() < EPS {
            return Err(PolygonError::ZeroArea);
        }
        poly.check_simple(true)?;
        Ok(poly)
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self, PolygonError> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Non-adjacent edges must not touch; with `adjacent`, neighbouring
    /// edges must not fold back onto each other either.
    fn check_simple(&self, adjacent_pairs: bool) -> Result<(), PolygonError> {
        let n = self.vertices.len();
        let edges: Vec<Segment> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    if !adjacent_pairs {
                        continue;
                    }
                    let (shared, p, q) = if j == i + 1 {
                        (edges[i].b, edges[i].a, edges[j].b)
                    } else {
                        (edges[i].a, edges[i].b, edges[j].a)
                    };
                    let u = p - shared;
                    let v = q - shared;
                    if u.cross(v).abs() < EPS * u.norm() * v.norm() && u.dot(v) > 0.0 {
                        return Err(PolygonError::SelfIntersecting(i, j));
                    }
                } else if edges[i].intersects(&edges[j]) {
                    return Err(PolygonError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive for counterclockwise winding.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    /// Even-odd containment. Points on an edge give an unspecified answer;
    /// callers that care test [`Polygon::distance_to_boundary`] first.
    pub fn contains_even_odd(&self, p: Point) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.edges()
            .map(|e| e.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Strictly inside: contained and not within [`EPS`] of an edge.
    pub fn strictly_contains(&self, p: Point) -> bool {
        self.distance_to_boundary(p) > EPS && self.contains_even_odd(p)
    }

    /// Inside or on the boundary.
    pub fn contains_closed(&self, p: Point) -> bool {
        self.distance_to_boundary(p) <= EPS || self.contains_even_odd(p)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn translated(&self, by: Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + by).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v * k).collect(),
        }
    }
}

/// A ray with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub direction: Point,
}

impl Ray {
    pub fn new(origin: Point, theta: f64) -> Self {
        Self {
            origin,
            direction: Point::from_angle(theta),
        }
    }

    pub fn at(&self, t: f64) -> Point {
        self.origin + self.direction * t
    }
}

/// Which containment check put a point outside free space.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("point {0} lies outside the boundary")]
    OutsideBoundary(Point),
    #[error("point {0} lies on the boundary")]
    OnBoundary(Point),
    #[error("point {point} lies inside obstacle {index}")]
    InsideObstacle { point: Point, index: usize },
    #[error("point {point} lies on the edge of obstacle {index}")]
    OnObstacle { point: Point, index: usize },
}

/// Explain why `p` is not in free space, or `Ok(())` if it is.
pub fn check_free_space(env: &Environment, p: Point) -> Result<(), DomainError> {
    let boundary = env.boundary();
    if boundary.distance_to_boundary(p) <= EPS {
        return Err(DomainError::OnBoundary(p));
    }
    if !boundary.contains_even_odd(p) {
        return Err(DomainError::OutsideBoundary(p));
    }
    for (index, obstacle) in env.obstacles().iter().enumerate() {
        if obstacle.distance_to_boundary(p) <= EPS {
            return Err(DomainError::OnObstacle { point: p, index });
        }
        if obstacle.contains_even_odd(p) {
            return Err(DomainError::InsideObstacle { point: p, index });
        }
    }
    Ok(())
}

pub fn point_in_free_space(env: &Environment, p: Point) -> bool {
    check_free_space(env, p).is_ok()
}

/// Distance from `p` along heading `theta` to the first wall or obstacle edge.
pub fn ray_distance(env: &Environment, p: Point, theta: f64) -> Result<f64, DomainError> {
    check_free_space(env, p)?;
    Ok(cast(env, &Ray::new(p, theta)))
}

/// Unchecked ray cast; the origin is assumed to be in free space.
pub(crate) fn cast(env: &Environment, ray: &Ray) -> f64 {
    env.edges()
        .filter_map(|e| e.ray_hit(ray.origin, ray.direction))
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `p` to the nearest point on any wall or obstacle edge.
pub fn clearance(env: &Environment, p: Point) -> Result<f64, DomainError> {
    check_free_space(env, p)?;
    Ok(clearance_unchecked(env, p))
}

pub(crate) fn clearance_unchecked(env: &Environment, p: Point) -> f64 {
    env.edges()
        .map(|e| e.distance_to_point(p))
        .fold(f64::INFINITY, f64::min)
}

/// Nearest point on any edge together with its distance.
pub(crate) fn nearest_edge_point(env: &Environment, p: Point) -> (Point, f64) {
    env.edges()
        .map(|e| {
            let q = e.closest_point(p);
            (q, q.distance(p))
        })
        .fold(
            (p, f64::INFINITY),
            |best, c| if c.1 < best.1 { c } else { best },
        )
}

/// Minimum clearance along the segment `a`-`b`; zero if it touches any edge.
pub fn segment_clearance(env: &Environment, a: Point, b: Point) -> Result<f64, DomainError> {
    check_free_space(env, a)?;
    check_free_space(env, b)?;
    let path = Segment::new(a, b);
    Ok(env
        .edges()
        .map(|e| path.distance_to_segment(&e))
        .fold(f64::INFINITY, f64::min))
}
