//! Passage detection between pairs of inflated obstacles.
//!
//! A passage starts from the shortest segment between two obstacles. The
//! line through that segment is shifted sideways in steps of `kappa` in both
//! directions for as long as it still cuts both obstacles and the free gap
//! between them stays within `l_max`; the last segments reached on either
//! side become the entrance and the exit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Segment, Vec2};
use crate::world::{Bounds, ConvexObstacle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PassageDetectionParams {
    /// Shifting step in meters.
    pub kappa: f64,
    /// Longest segment still considered part of a passage, in meters.
    pub l_max: f64,
    /// Whether gaps between obstacles and the workspace walls form passages.
    pub walls: bool,
}

impl Default for PassageDetectionParams {
    fn default() -> Self {
        Self {
            kappa: 0.01,
            l_max: 0.8,
            walls: true,
        }
    }
}

/// Unordered obstacle pair identifying a passage; always `s < c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PassageId {
    pub s: usize,
    pub c: usize,
}

impl PassageId {
    pub fn new(a: usize, b: usize) -> Self {
        Self {
            s: a.min(b),
            c: a.max(b),
        }
    }
}

impl std::fmt::Display for PassageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.s, self.c)
    }
}

/// Entrance, narrowest segment and exit of the gap between two obstacles.
/// Every segment runs from obstacle `s` to obstacle `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PassageDoc", try_from = "PassageDoc")]
pub struct CompletePassage {
    pub id: PassageId,
    pub entrance: Segment,
    pub narrowest: Segment,
    pub exit: Segment,
    pub width: f64,
}

#[derive(Serialize, Deserialize)]
struct PassageDoc {
    s: usize,
    c: usize,
    entrance: Segment,
    narrowest: Segment,
    exit: Segment,
    width: f64,
}

impl From<CompletePassage> for PassageDoc {
    fn from(p: CompletePassage) -> Self {
        PassageDoc {
            s: p.id.s,
            c: p.id.c,
            entrance: p.entrance,
            narrowest: p.narrowest,
            exit: p.exit,
            width: p.width,
        }
    }
}

impl TryFrom<PassageDoc> for CompletePassage {
    type Error = String;
    fn try_from(d: PassageDoc) -> std::result::Result<Self, String> {
        if d.s >= d.c {
            return Err(format!("passage requires s < c, got ({}, {})", d.s, d.c));
        }
        if !(d.width > 0.0) {
            return Err(format!("passage ({}, {}) has non-positive width", d.s, d.c));
        }
        Ok(CompletePassage {
            id: PassageId { s: d.s, c: d.c },
            entrance: d.entrance,
            narrowest: d.narrowest,
            exit: d.exit,
            width: d.width,
        })
    }
}

impl CompletePassage {
    /// Unit shifting direction; the entrance lies on its positive side.
    pub fn axis(&self) -> Vec2 {
        let u = (self.narrowest.b - self.narrowest.a)
            .normalized()
            .unwrap_or(Vec2::new(1.0, 0.0));
        Vec2::new(u.y, -u.x)
    }

    /// Distance from the narrowest segment to the entrance along the axis.
    pub fn entrance_depth(&self) -> f64 {
        (self.entrance.a - self.narrowest.a).dot(self.axis()).max(0.0)
    }

    /// Distance from the narrowest segment to the exit along the axis.
    pub fn exit_depth(&self) -> f64 {
        (self.narrowest.a - self.exit.a).dot(self.axis()).max(0.0)
    }

    /// Arc-length offsets `(before, after)` of the passage boundaries
    /// relative to a narrowest-segment crossing travelling with `direction`
    /// (+1 along the axis, -1 against it).
    pub fn span_offsets(&self, direction: i8) -> (f64, f64) {
        if direction >= 0 {
            (self.exit_depth(), self.entrance_depth())
        } else {
            (self.entrance_depth(), self.exit_depth())
        }
    }
}

/// All complete passages of a map, sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PassageSet {
    passages: Vec<CompletePassage>,
}

impl PassageSet {
    /// Builds a set from arbitrary passages; keeps the first passage per pair.
    pub fn from_passages(passages: Vec<CompletePassage>) -> Self {
        let mut by_id = BTreeMap::new();
        for p in passages {
            by_id.entry(p.id).or_insert(p);
        }
        Self {
            passages: by_id.into_values().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CompletePassage> {
        self.passages.iter()
    }

    pub fn get(&self, id: PassageId) -> Option<&CompletePassage> {
        self.passages
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.passages[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("passages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: PassageSet = serde_json::from_str(text)?;
        Ok(Self::from_passages(set.passages))
    }
}

/// Closest pair of points between two disjoint convex polygons, as a
/// segment from `a` to `b`.
///
/// Exact vertex/edge enumeration. When the minimum is attained along two
/// parallel faces the middle of the overlapping stretch is returned.
pub fn shortest_segment(a: &ConvexObstacle, b: &ConvexObstacle) -> Result<Segment> {
    shortest_segment_ids(a, b, 0, 1)
}

fn shortest_segment_ids(a: &ConvexObstacle, b: &ConvexObstacle, ia: usize, ib: usize) -> Result<Segment> {
    let (pa, pb) = (&a.vertices, &b.vertices);
    if geometry::polygons_intersect(pa, pb, 1e-12) {
        return Err(Error::Overlap(ia, ib));
    }
    let mut cands: Vec<(Vec2, Vec2, f64)> = Vec::with_capacity(2 * pa.len() * pb.len());
    for &p in pa {
        for (q0, q1) in geometry::edges(pb) {
            let q = Segment::new(q0, q1).closest_point(p);
            cands.push((p, q, p.dist(q)));
        }
    }
    for &q in pb {
        for (p0, p1) in geometry::edges(pa) {
            let p = Segment::new(p0, p1).closest_point(q);
            cands.push((p, q, p.dist(q)));
        }
    }
    let best = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    if best <= 1e-12 {
        return Err(Error::Overlap(ia, ib));
    }
    let ties: Vec<&(Vec2, Vec2, f64)> = cands.iter().filter(|c| c.2 <= best + 1e-9).collect();
    let (p0, q0, _) = *ties[0];
    let along = (q0 - p0).perp() / best;
    let key = |c: &&(Vec2, Vec2, f64)| c.0.dot(along);
    let lo = ties.iter().min_by(|x, y| key(x).total_cmp(&key(y))).unwrap();
    let hi = ties.iter().max_by(|x, y| key(x).total_cmp(&key(y))).unwrap();
    if key(hi) - key(lo) > 1e-9 {
        Ok(Segment::new(lo.0.lerp(hi.0, 0.5), lo.1.lerp(hi.1, 0.5)))
    } else {
        Ok(Segment::new(p0, q0))
    }
}

/// True iff the shortest segment between obstacles `s` and `c` exists and
/// does not cut through any third obstacle.
pub fn is_passage_valid(s: usize, c: usize, obstacles: &[ConvexObstacle]) -> bool {
    let id = PassageId::new(s, c);
    let Ok(seg) = shortest_segment_ids(&obstacles[id.s], &obstacles[id.c], id.s, id.c) else {
        return false;
    };
    segment_is_unblocked(&seg, id, obstacles)
}

fn segment_is_unblocked(seg: &Segment, id: PassageId, obstacles: &[ConvexObstacle]) -> bool {
    obstacles
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != id.s && *k != id.c)
        .all(|(_, o)| !geometry::segment_penetrates(&o.vertices, seg.a, seg.b, 1e-9))
}

/// Gap between obstacles `s` and `c` on the line `origin + t·dir`: the pair of
/// boundary points facing each other, or `None` when the line misses either
/// obstacle.
fn gap_on_line(s: &[Vec2], c: &[Vec2], origin: Vec2, dir: Vec2) -> Option<Segment> {
    let all = (f64::NEG_INFINITY, f64::INFINITY);
    let (s_lo, s_hi) = geometry::clip_line(s, origin, dir, all, 0.0)?;
    let (c_lo, c_hi) = geometry::clip_line(c, origin, dir, all, 0.0)?;
    if s_hi <= c_lo {
        Some(Segment::new(origin + dir * s_hi, origin + dir * c_lo))
    } else if c_hi <= s_lo {
        Some(Segment::new(origin + dir * s_lo, origin + dir * c_hi))
    } else {
        None
    }
}

/// Extends the shortest segment of a valid pair into a complete passage.
/// Returns `None` when the pair is invalid or wider than `l_max`.
pub fn detect_complete_passage(
    s: usize,
    c: usize,
    obstacles: &[ConvexObstacle],
    params: &PassageDetectionParams,
) -> Option<CompletePassage> {
    let id = PassageId::new(s, c);
    let (os, oc) = (&obstacles[id.s].vertices, &obstacles[id.c].vertices);
    let narrowest = shortest_segment_ids(&obstacles[id.s], &obstacles[id.c], id.s, id.c).ok()?;
    let width = narrowest.length();
    if width > params.l_max || !segment_is_unblocked(&narrowest, id, obstacles) {
        return None;
    }
    let u = (narrowest.b - narrowest.a) / width;
    let axis = Vec2::new(u.y, -u.x);

    let extreme = |sign: f64| -> Segment {
        let mut last = narrowest;
        // obstacles are bounded, so the line leaves one of them eventually;
        // the cap only guards against degenerate input
        for m in 1..1_000_000u32 {
            let origin = narrowest.a + axis * (sign * m as f64 * params.kappa);
            match gap_on_line(os, oc, origin, u) {
                Some(seg) if seg.length() <= params.l_max => last = seg,
                _ => break,
            }
        }
        last
    };
    Some(CompletePassage {
        id,
        entrance: extreme(1.0),
        narrowest,
        exit: extreme(-1.0),
        width,
    })
}

/// Runs validity checking and completion over every unordered obstacle pair.
pub fn detect_all_passages(obstacles: &[ConvexObstacle], params: &PassageDetectionParams) -> PassageSet {
    detect_pairs(obstacles, obstacles.len(), params)
}

fn detect_pairs(obstacles: &[ConvexObstacle], first_wall: usize, params: &PassageDetectionParams) -> PassageSet {
    let n = obstacles.len();
    let mut out = Vec::new();
    for s in 0..n {
        for c in s + 1..n {
            if s >= first_wall {
                continue;
            }
            if let Some(p) = detect_complete_passage(s, c, obstacles, params) {
                out.push(p);
            }
        }
    }
    PassageSet::from_passages(out)
}

/// Four slabs bordering `bounds` from outside, reaching `inset` into it:
/// left, right, bottom, top.
pub fn wall_obstacles(bounds: &Bounds, inset: f64) -> Vec<ConvexObstacle> {
    let t = bounds.width().max(bounds.height());
    let (lo, hi) = (bounds.min, bounds.max);
    vec![
        ConvexObstacle::rect(Vec2::new(lo.x - t, lo.y - t), Vec2::new(lo.x + inset, hi.y + t)),
        ConvexObstacle::rect(Vec2::new(hi.x - inset, lo.y - t), Vec2::new(hi.x + t, hi.y + t)),
        ConvexObstacle::rect(Vec2::new(lo.x - t, lo.y - t), Vec2::new(hi.x + t, lo.y + inset)),
        ConvexObstacle::rect(Vec2::new(lo.x - t, hi.y - inset), Vec2::new(hi.x + t, hi.y + t)),
    ]
}

/// Passages of an inflated obstacle set. With `params.walls` the wall slabs
/// of `bounds` (inset by `inflation`) take the indices after the obstacles;
/// pairs of two walls are skipped.
pub fn detect_world_passages(
    inflated: &[ConvexObstacle],
    bounds: &Bounds,
    inflation: f64,
    params: &PassageDetectionParams,
) -> PassageSet {
    if !params.walls {
        return detect_all_passages(inflated, params);
    }
    let mut all = inflated.to_vec();
    all.extend(wall_obstacles(bounds, inflation));
    detect_pairs(&all, inflated.len(), params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexObstacle {
        ConvexObstacle::rect(Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    #[test]
    fn parallel_faces_use_overlap_midpoint() {
        let seg = shortest_segment(&rect(0.0, 0.0, 1.0, 1.0), &rect(2.0, 0.0, 3.0, 1.0)).unwrap();
        assert!((seg.length() - 1.0).abs() < 1e-12);
        assert!(seg.a.dist(Vec2::new(1.0, 0.5)) < 1e-12);
        assert!(seg.b.dist(Vec2::new(2.0, 0.5)) < 1e-12);
    }

    #[test]
    fn vertex_to_vertex() {
        let seg = shortest_segment(&rect(0.0, 0.0, 1.0, 1.0), &rect(2.0, 2.0, 3.0, 3.0)).unwrap();
        assert!(seg.a.dist(Vec2::new(1.0, 1.0)) < 1e-12);
        assert!(seg.b.dist(Vec2::new(2.0, 2.0)) < 1e-12);
        assert!((seg.length() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overlapping_pair_is_an_error() {
        let r = shortest_segment(&rect(0.0, 0.0, 1.0, 1.0), &rect(0.5, 0.5, 2.0, 2.0));
        assert!(matches!(r, Err(Error::Overlap(..))));
        let touching = shortest_segment(&rect(0.0, 0.0, 1.0, 1.0), &rect(1.0, 0.0, 2.0, 1.0));
        assert!(touching.is_err());
    }

    #[test]
    fn validity_against_third_obstacle() {
        let two = [rect(0.0, 0.0, 1.0, 1.0), rect(2.0, 0.0, 3.0, 1.0)];
        assert!(is_passage_valid(0, 1, &two));
        let blocked = [
            rect(0.0, 0.0, 1.0, 1.0),
            rect(2.0, 0.0, 3.0, 1.0),
            rect(1.4, 0.3, 1.6, 0.7),
        ];
        assert!(!is_passage_valid(0, 1, &blocked));
        assert!(is_passage_valid(0, 2, &blocked));
    }

    #[test]
    fn square_pair_passage() {
        let obs = [rect(0.0, 0.0, 1.0, 1.0), rect(2.0, 0.0, 3.0, 1.0)];
        let p = PassageDetectionParams {
            kappa: 0.01,
            l_max: 2.0,
            walls: false,
        };
        let cp = detect_complete_passage(0, 1, &obs, &p).unwrap();
        assert!((cp.width - 1.0).abs() < 1e-12);
        assert!(cp.entrance.a.y.abs() <= 0.01 && cp.entrance.b.y.abs() <= 0.01);
        assert!((cp.exit.a.y - 1.0).abs() <= 0.01);
        for seg in [cp.entrance, cp.exit] {
            assert!((seg.length() - 1.0).abs() < 1e-9);
        }
        assert_eq!(detect_complete_passage(1, 0, &obs, &p), Some(cp));
        let narrow = PassageDetectionParams {
            kappa: 0.01,
            l_max: 0.5,
            walls: false,
        };
        assert!(detect_complete_passage(0, 1, &obs, &narrow).is_none());
    }

    #[test]
    fn funnel_stops_at_l_max() {
        let s = ConvexObstacle::new(vec![Vec2::new(0.0, 0.0), Vec2::new(-1.0, -1.0), Vec2::new(-1.0, 1.0)]).unwrap();
        let c = ConvexObstacle::new(vec![Vec2::new(0.3, 0.0), Vec2::new(1.3, 1.0), Vec2::new(1.3, -1.0)]).unwrap();
        let p = PassageDetectionParams {
            kappa: 0.01,
            l_max: 0.8,
            walls: false,
        };
        let cp = detect_complete_passage(0, 1, &[s, c], &p).unwrap();
        assert!((cp.width - 0.3).abs() < 1e-6);
        assert!(cp.entrance.length() <= 0.8 && cp.exit.length() <= 0.8);
        // gap = 0.3 + 2|y| so both sides stop within one step of |y| = 0.25
        assert!((cp.entrance_depth() - 0.25).abs() <= 0.01);
        assert!((cp.exit_depth() - 0.25).abs() <= 0.01);
    }

    #[test]
    fn collinear_squares_yield_adjacent_passages() {
        let obs = [
            rect(0.0, 0.0, 1.0, 1.0),
            rect(1.5, 0.0, 2.5, 1.0),
            rect(3.0, 0.0, 4.0, 1.0),
        ];
        assert!(!is_passage_valid(0, 2, &obs));
        let set = detect_all_passages(
            &obs,
            &PassageDetectionParams {
                kappa: 0.01,
                l_max: 2.0,
                walls: false,
            },
        );
        let ids: Vec<PassageId> = set.iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![PassageId::new(0, 1), PassageId::new(1, 2)]);
        assert!(detect_all_passages(&obs[..1], &PassageDetectionParams::default()).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let obs = [rect(0.0, 0.0, 1.0, 1.0), rect(1.5, 0.0, 2.5, 1.0)];
        let set = detect_all_passages(&obs, &PassageDetectionParams::default());
        assert_eq!(set.len(), 1);
        let text = set.to_json();
        assert!(text.contains("\"narrowest\""));
        assert_eq!(PassageSet::from_json(&text).unwrap(), set);
    }
}
