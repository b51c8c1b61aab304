//! Planar primitives shared by every stage: points, segments and convex
//! polygon queries. Polygons are plain vertex slices in counter-clockwise
//! order; callers own validation.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A 2-D point or vector in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near) zero input.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-12).then(|| self / n)
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn from_angle(angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Closed line segment between two points. Serialized as `[[x, y], [x, y]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Vec2; 2]", into = "[Vec2; 2]")]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl From<[Vec2; 2]> for Segment {
    fn from(s: [Vec2; 2]) -> Self {
        Segment { a: s[0], b: s[1] }
    }
}

impl From<Segment> for [Vec2; 2] {
    fn from(s: Segment) -> Self {
        [s.a, s.b]
    }
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn midpoint(&self) -> Vec2 {
        self.a.lerp(self.b, 0.5)
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.a.lerp(self.b, t)
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.b, self.a)
    }

    /// Parameter in `[0, 1]` of the point on the segment closest to `p`.
    pub fn closest_param(&self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let l2 = d.norm_sq();
        if l2 <= 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(d) / l2).clamp(0.0, 1.0)
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        self.point_at(self.closest_param(p))
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.closest_point(p).dist(p)
    }
}

/// Intersection of closed segments `p0p1` and `q0q1`.
///
/// Returns the parameters `(t, u)` of the intersection point along each
/// segment. For collinear overlapping segments the overlap point with the
/// smallest `t` is reported.
pub fn segment_intersection(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<(f64, f64)> {
    const EPS: f64 = 1e-12;
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    let qp = q0 - p0;
    let scale = r.norm() * s.norm();
    if denom.abs() <= EPS * scale.max(EPS) {
        // parallel
        if qp.cross(r).abs() > EPS * r.norm().max(EPS) * qp.norm().max(1.0) {
            return None;
        }
        let rr = r.norm_sq();
        if rr <= 0.0 {
            // p is a point
            let seg = Segment::new(q0, q1);
            return (seg.distance_to(p0) <= 1e-12).then(|| (0.0, seg.closest_param(p0)));
        }
        let t0 = qp.dot(r) / rr;
        let t1 = (q1 - p0).dot(r) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi < 0.0 || lo > 1.0 {
            return None;
        }
        let t = lo.max(0.0);
        let ss = s.norm_sq();
        let u = if ss > 0.0 {
            ((p0 + r * t - q0).dot(s) / ss).clamp(0.0, 1.0)
        } else {
            0.0
        };
        return Some((t, u));
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    const TOL: f64 = 1e-12;
    if (-TOL..=1.0 + TOL).contains(&t) && (-TOL..=1.0 + TOL).contains(&u) {
        Some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// Signed area (positive for counter-clockwise order).
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>() * 0.5
}

pub fn perimeter(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].dist(poly[(i + 1) % n])).sum()
}

pub fn centroid(poly: &[Vec2]) -> Vec2 {
    let sum = poly.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
    sum / poly.len() as f64
}

/// Edges of a polygon as `(start, end)` pairs, wrapping around.
pub fn edges(poly: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (poly[i], poly[(i + 1) % n]))
}

/// True iff every turn is a left turn (or straight) and the polygon is
/// non-degenerate.
pub fn is_convex_ccw(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly) <= 0.0 {
        return false;
    }
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        (b - a).cross(c - b) >= -1e-12
    })
}

/// Signed distance from `p` to the boundary of a convex CCW polygon:
/// negative inside, positive outside (exact outside, max-halfplane inside).
pub fn signed_distance(poly: &[Vec2], p: Vec2) -> f64 {
    let d = boundary_distance(poly, p);
    if contains(poly, p, 0.0) {
        -d
    } else {
        d
    }
}

/// Unsigned distance from `p` to the polygon boundary.
pub fn boundary_distance(poly: &[Vec2], p: Vec2) -> f64 {
    nearest_boundary_point(poly, p).dist(p)
}

pub fn nearest_boundary_point(poly: &[Vec2], p: Vec2) -> Vec2 {
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for (a, b) in edges(poly) {
        let q = Segment::new(a, b).closest_point(p);
        let d = q.dist(p);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Distance from `p` to the polygon as a set (zero inside).
pub fn distance_to_polygon(poly: &[Vec2], p: Vec2) -> f64 {
    if contains(poly, p, 0.0) {
        0.0
    } else {
        boundary_distance(poly, p)
    }
}

/// Point-in-convex-polygon with a margin: `tol > 0` grows the polygon,
/// `tol < 0` shrinks it.
pub fn contains(poly: &[Vec2], p: Vec2, tol: f64) -> bool {
    edges(poly).all(|(a, b)| {
        let e = b - a;
        let len = e.norm();
        if len <= 0.0 {
            return true;
        }
        // outward normal of a CCW edge is (e.y, -e.x)
        let n = Vec2::new(e.y, -e.x) / len;
        n.dot(p - a) <= tol
    })
}

/// Parameter interval `[t_in, t_out]` over which the line `p + t·d`
/// (restricted to `range`) lies inside the convex polygon shrunk by `shrink`.
pub fn clip_line(poly: &[Vec2], p: Vec2, d: Vec2, range: (f64, f64), shrink: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = range;
    for (a, b) in edges(poly) {
        let e = b - a;
        let len = e.norm();
        if len <= 0.0 {
            continue;
        }
        let n = Vec2::new(e.y, -e.x) / len;
        // inside: n·(p + t d - a) <= -shrink
        let num = -shrink - n.dot(p - a);
        let den = n.dot(d);
        if den.abs() < 1e-15 {
            if num < 0.0 {
                return None;
            }
        } else if den > 0.0 {
            hi = hi.min(num / den);
        } else {
            lo = lo.max(num / den);
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// True if the closed segment `ab` enters the polygon interior deeper than
/// `tol` (touching the boundary does not count).
pub fn segment_penetrates(poly: &[Vec2], a: Vec2, b: Vec2, tol: f64) -> bool {
    clip_line(poly, a, b - a, (0.0, 1.0), tol).is_some()
}

/// Distance between two closed segments.
pub fn segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segment_intersection(a0, a1, b0, b1).is_some() {
        return 0.0;
    }
    let sa = Segment::new(a0, a1);
    let sb = Segment::new(b0, b1);
    sb.distance_to(a0)
        .min(sb.distance_to(a1))
        .min(sa.distance_to(b0))
        .min(sa.distance_to(b1))
}

/// Distance from segment `ab` to a convex polygon (zero on contact).
pub fn segment_polygon_distance(poly: &[Vec2], a: Vec2, b: Vec2) -> f64 {
    if contains(poly, a, 0.0) || contains(poly, b, 0.0) {
        return 0.0;
    }
    edges(poly)
        .map(|(p, q)| segment_distance(a, b, p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Distance between two convex polygons (zero when they touch or overlap).
pub fn polygon_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    if polygons_intersect(a, b, 0.0) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in edges(a) {
        for (r, s) in edges(b) {
            best = best.min(segment_distance(p, q, r, s));
        }
    }
    best
}

/// Separating-axis test for two convex polygons; touching counts as
/// intersecting when `tol >= 0`.
pub fn polygons_intersect(a: &[Vec2], b: &[Vec2], tol: f64) -> bool {
    fn separated(a: &[Vec2], b: &[Vec2], tol: f64) -> bool {
        edges(a).any(|(p, q)| {
            let e = q - p;
            let len = e.norm();
            if len <= 0.0 {
                return false;
            }
            let n = Vec2::new(e.y, -e.x) / len;
            b.iter().all(|&v| n.dot(v - p) > tol)
        })
    }
    !(separated(a, b, tol) || separated(b, a, tol))
}

/// Andrew's monotone chain; returns a CCW hull without collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-14 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-14 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}
