//! Brute-force passage geometry: sampled boundary distances and a fine
//! line-shifting sweep.

use homoplan::geometry::{Segment, Vec2};
use homoplan::world::ConvexObstacle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let d = b - a;
    let t = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
    a + d * t
}

fn closest_on_polygon(poly: &[Vec2], p: Vec2) -> Vec2 {
    let n = poly.len();
    (0..n)
        .map(|k| point_segment(p, poly[k], poly[(k + 1) % n]))
        .min_by(|x, y| x.dist(p).total_cmp(&y.dist(p)))
        .unwrap()
}

/// Vertices plus points every `step` along each edge.
pub fn boundary_samples(poly: &[Vec2], step: f64) -> Vec<Vec2> {
    let n = poly.len();
    let mut out = Vec::new();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let m = (a.dist(b) / step).ceil() as usize;
        for j in 0..m {
            out.push(a.lerp(b, j as f64 / m as f64));
        }
    }
    out
}

/// Shortest distance between two polygon boundaries by sampling both, as a
/// segment from `a` to `b`.
pub fn sampled_shortest(a: &[Vec2], b: &[Vec2], step: f64) -> Segment {
    let mut best = (f64::INFINITY, Vec2::ZERO, Vec2::ZERO);
    for p in boundary_samples(a, step) {
        let q = closest_on_polygon(b, p);
        if p.dist(q) < best.0 {
            best = (p.dist(q), p, q);
        }
    }
    for q in boundary_samples(b, step) {
        let p = closest_on_polygon(a, q);
        if p.dist(q) < best.0 {
            best = (p.dist(q), p, q);
        }
    }
    Segment::new(best.1, best.2)
}

/// Parameter interval where `origin + t * dir` lies inside the polygon.
fn chord(poly: &[Vec2], origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
    let n = poly.len();
    let mut ts = Vec::new();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let e = b - a;
        let den = dir.cross(e);
        if den.abs() < 1e-15 {
            continue;
        }
        let w = a - origin;
        let t = w.cross(e) / den;
        let s = w.cross(dir) / den;
        if (-1e-12..=1.0 + 1e-12).contains(&s) {
            ts.push(t);
        }
    }
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi > lo).then_some((lo, hi))
}

/// Free gap between the two polygons on the line `origin + t * dir`.
pub fn gap(a: &[Vec2], b: &[Vec2], origin: Vec2, dir: Vec2) -> Option<Segment> {
    let (a_lo, a_hi) = chord(a, origin, dir)?;
    let (b_lo, b_hi) = chord(b, origin, dir)?;
    if a_hi <= b_lo {
        Some(Segment::new(origin + dir * a_hi, origin + dir * b_lo))
    } else if b_hi <= a_lo {
        Some(Segment::new(origin + dir * a_lo, origin + dir * b_hi))
    } else {
        None
    }
}

/// Entrance and exit found by shifting the line of `narrowest` in steps of
/// `step` while the gap stays within `l_max`. The entrance lies on the
/// right of the direction from `a` to `b`.
pub fn swept_ends(a: &[Vec2], b: &[Vec2], narrowest: Segment, l_max: f64, step: f64) -> (Segment, Segment) {
    let u = (narrowest.b - narrowest.a) / narrowest.length();
    let axis = Vec2::new(u.y, -u.x);
    let sweep = |sign: f64| {
        let mut last = narrowest;
        let mut m = 1.0;
        loop {
            match gap(a, b, narrowest.a + axis * (sign * m * step), u) {
                Some(g) if g.length() <= l_max => last = g,
                _ => return last,
            }
            m += 1.0;
        }
    };
    (sweep(1.0), sweep(-1.0))
}

fn random_polygon(rng: &mut ChaCha8Rng, center: Vec2) -> ConvexObstacle {
    let n = rng.gen_range(3..=7);
    let r = rng.gen_range(0.3..0.8);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let pts: Vec<Vec2> = angles.iter().map(|&t| center + Vec2::from_angle(t) * r).collect();
    ConvexObstacle::new(pts).unwrap()
}

/// Seeded pair of convex polygons whose gap is between 0.05 and 0.7 m.
pub fn random_pair(seed: u64) -> (ConvexObstacle, ConvexObstacle) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = random_polygon(&mut rng, Vec2::ZERO);
        let dir = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
        let offset = dir * rng.gen_range(1.0..2.2);
        let b = random_polygon(&mut rng, offset);
        let d = sampled_shortest(&a.vertices, &b.vertices, 0.05).length();
        if (0.05..0.7).contains(&d) && !a.vertices.iter().any(|&p| b.contains(p)) {
            return (a, b);
        }
    }
}
