//! Homotopy-aware global planning on the Voronoi roadmap.
//!
//! The search minimizes
//!
//! ```text
//! cost = Len - lambda_p * f_p + lambda_h * f_h
//! ```
//!
//! where `f_p` is the narrowest passage crossed and `f_h` sums the conflict
//! indices of every passage crossing against the time maps of higher
//! priority agents. Both terms depend on the whole path prefix, so the
//! search keeps several labels per vertex and prunes them by dominance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::passage::{PassageId, PassageSet};
use crate::voronoi::{self, other_end, VoronoiGraph};
use crate::world::ConvexObstacle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub lambda_p: f64,
    pub lambda_h: f64,
    /// Temporal tolerance of the conflict index, 1/s. Must be negative.
    pub alpha: f64,
    /// Reference speed used to time the path, m/s.
    pub avg_velocity: f64,
    /// Width credited to a path that crosses no passage. Defaults to the
    /// passage detection `l_max`.
    pub no_passage_width: Option<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            lambda_p: 50.0,
            lambda_h: 500.0,
            alpha: -0.3,
            avg_velocity: 0.5,
            no_passage_width: None,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha < 0.0) {
            return Err(Error::validation("planner.alpha", "must be negative"));
        }
        if !(self.lambda_p >= 0.0) || !(self.lambda_h >= 0.0) {
            return Err(Error::validation("planner weights", "must be non-negative"));
        }
        if !(self.avg_velocity > 0.0) {
            return Err(Error::validation("planner.avg_velocity", "must be positive"));
        }
        Ok(())
    }
}

/// Closed time interval `[start, end]`, serialized as `[t1, t2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct TimeSpan {
    pub start: f64,
    pub end: f64,
}

impl From<[f64; 2]> for TimeSpan {
    fn from(v: [f64; 2]) -> Self {
        TimeSpan::new(v[0], v[1])
    }
}

impl From<TimeSpan> for [f64; 2] {
    fn from(s: TimeSpan) -> Self {
        [s.start, s.end]
    }
}

impl TimeSpan {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            start: a.min(b),
            end: a.max(b),
        }
    }

    pub fn overlaps(&self, o: &TimeSpan) -> bool {
        self.start < o.end && o.start < self.end
    }

    pub fn shifted(&self, dt: f64) -> TimeSpan {
        TimeSpan::new(self.start + dt, self.end + dt)
    }
}

/// Conflict index of two spans: 1 when they overlap, otherwise
/// `exp(alpha * gap)`.
pub fn span_conflict(a: &TimeSpan, b: &TimeSpan, alpha: f64) -> f64 {
    if a.overlaps(b) {
        return 1.0;
    }
    let gap = (a.start.max(b.start) - a.end.min(b.end)).abs();
    (alpha * gap).exp()
}

/// Times at which one agent occupies each passage it crosses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "TimeMapDoc", into = "TimeMapDoc")]
pub struct PassageTimeMap {
    pub agent: usize,
    pub entries: BTreeMap<PassageId, Vec<TimeSpan>>,
    pub version: u64,
}

#[derive(Serialize, Deserialize)]
struct TimeMapDoc {
    agent: usize,
    version: u64,
    entries: Vec<(PassageId, Vec<TimeSpan>)>,
}

impl From<TimeMapDoc> for PassageTimeMap {
    fn from(d: TimeMapDoc) -> Self {
        let mut entries: BTreeMap<PassageId, Vec<TimeSpan>> = BTreeMap::new();
        for (id, spans) in d.entries {
            entries.entry(id).or_default().extend(spans);
        }
        Self {
            agent: d.agent,
            entries,
            version: d.version,
        }
    }
}

impl From<PassageTimeMap> for TimeMapDoc {
    fn from(m: PassageTimeMap) -> Self {
        Self {
            agent: m.agent,
            version: m.version,
            entries: m.entries.into_iter().collect(),
        }
    }
}

impl PassageTimeMap {
    pub fn new(agent: usize) -> Self {
        Self {
            agent,
            ..Self::default()
        }
    }

    pub fn spans(&self, passage: PassageId) -> &[TimeSpan] {
        self.entries.get(&passage).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Conflict index of `span` against agent `map_j` at `passage`; the worst
/// of agent j's spans there, or 0 when it never uses the passage.
pub fn conflict_index(span: &TimeSpan, map_j: &PassageTimeMap, passage: PassageId, alpha: f64) -> f64 {
    map_j
        .spans(passage)
        .iter()
        .map(|s| span_conflict(span, s, alpha))
        .fold(0.0, f64::max)
}

/// Total conflict of `map_i` against the maps of agents with a smaller
/// index than `map_i.agent`.
pub fn score_path(map_i: &PassageTimeMap, higher_maps: &[PassageTimeMap], alpha: f64) -> f64 {
    let mut total = 0.0;
    for (&id, spans) in &map_i.entries {
        for span in spans {
            for m in higher_maps.iter().filter(|m| m.agent < map_i.agent) {
                total += conflict_index(span, m, id, alpha);
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub p: Vec2,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCrossing {
    pub passage: PassageId,
    /// Arc length from the start of the path to the narrowest segment.
    pub arc: f64,
    pub time: f64,
    pub direction: i8,
}

/// Uniform-speed timed polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    pub agent: usize,
    pub waypoints: Vec<Waypoint>,
    pub crossings: Vec<PathCrossing>,
    pub avg_velocity: f64,
}

impl ReferencePath {
    /// Times a polyline at speed `v` starting at `t0`.
    pub fn from_points(agent: usize, points: &[Vec2], t0: f64, v: f64) -> Self {
        let mut waypoints = Vec::with_capacity(points.len());
        let mut arc = 0.0;
        for (k, &p) in points.iter().enumerate() {
            if k > 0 {
                arc += points[k - 1].dist(p);
            }
            waypoints.push(Waypoint { p, t: t0 + arc / v });
        }
        Self {
            agent,
            waypoints,
            crossings: Vec::new(),
            avg_velocity: v,
        }
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints.first().map_or(0.0, |w| w.t)
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.t)
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].p.dist(w[1].p)).sum()
    }

    pub fn points(&self) -> Vec<Vec2> {
        self.waypoints.iter().map(|w| w.p).collect()
    }

    pub fn point_at_arc(&self, s: f64) -> Vec2 {
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let l = w[0].p.dist(w[1].p);
            if s <= acc + l && l > 0.0 {
                return w[0].p.lerp(w[1].p, ((s - acc) / l).clamp(0.0, 1.0));
            }
            acc += l;
        }
        self.waypoints.last().map_or(Vec2::ZERO, |w| w.p)
    }

    /// Arc length reached at time `t`, clamped to the path.
    pub fn arc_at_time(&self, t: f64) -> f64 {
        ((t - self.start_time()) * self.avg_velocity).clamp(0.0, self.length())
    }

    pub fn position_at(&self, t: f64) -> Vec2 {
        self.point_at_arc(self.arc_at_time(t))
    }

    /// Nearest point of the path to `p` as `(arc length, distance)`. Only
    /// arc lengths in `[from, to]` are considered.
    pub fn project_within(&self, p: Vec2, from: f64, to: f64) -> (f64, f64) {
        let mut best = (from.max(0.0), f64::INFINITY);
        let mut acc = 0.0;
        if self.waypoints.len() == 1 {
            return (0.0, self.waypoints[0].p.dist(p));
        }
        for w in self.waypoints.windows(2) {
            let l = w[0].p.dist(w[1].p);
            let lo = ((from - acc) / l.max(1e-12)).clamp(0.0, 1.0);
            let hi = ((to - acc) / l.max(1e-12)).clamp(0.0, 1.0);
            if acc + l >= from && acc <= to {
                let d = w[1].p - w[0].p;
                let raw = if l > 0.0 { (p - w[0].p).dot(d) / (l * l) } else { 0.0 };
                let u = raw.clamp(lo, hi);
                let q = w[0].p + d * u;
                let dist = q.dist(p);
                if dist < best.1 - 1e-12 {
                    best = (acc + u * l, dist);
                }
            }
            acc += l;
        }
        best
    }

    pub fn project(&self, p: Vec2) -> (f64, f64) {
        self.project_within(p, 0.0, f64::INFINITY)
    }

    /// Re-times the path at speed `v` so that arc length `s_now` is reached
    /// at `t_now`.
    pub fn retimed(&self, s_now: f64, t_now: f64, v: f64) -> ReferencePath {
        let mut out = self.clone();
        out.avg_velocity = v;
        let mut acc = 0.0;
        for k in 0..out.waypoints.len() {
            if k > 0 {
                acc += self.waypoints[k - 1].p.dist(self.waypoints[k].p);
            }
            out.waypoints[k].t = t_now + (acc - s_now) / v;
        }
        for c in &mut out.crossings {
            c.time = t_now + (c.arc - s_now) / v;
        }
        out
    }
}

/// Spans of every crossing on `path`, centred on the narrowest-segment
/// crossing time and stretched to the entrance and exit at speed `v`.
pub fn build_time_map(path: &ReferencePath, passages: &PassageSet, v: f64) -> PassageTimeMap {
    let mut map = PassageTimeMap::new(path.agent);
    for c in &path.crossings {
        let Some(p) = passages.get(c.passage) else {
            continue;
        };
        let (before, after) = p.span_offsets(c.direction);
        map.entries
            .entry(c.passage)
            .or_default()
            .push(TimeSpan::new(c.time - before / v, c.time + after / v));
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub len: f64,
    pub f_p: f64,
    pub f_h: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub path: ReferencePath,
    pub time_map: PassageTimeMap,
    pub cost: CostBreakdown,
    /// Labels created during the search.
    pub labels: usize,
}

/// Everything about the map that stays fixed across queries.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    /// Roadmap already annotated with passage crossings.
    pub graph: &'a VoronoiGraph,
    /// Obstacles inflated by the agent radius.
    pub obstacles: &'a [ConvexObstacle],
    pub passages: &'a PassageSet,
    pub l_max: f64,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    passage: PassageId,
    offset: f64,
    direction: i8,
    before: f64,
    after: f64,
    width: f64,
}

#[derive(Debug)]
struct Chain {
    a: usize,
    b: usize,
    verts: Vec<usize>,
    length: f64,
    fwd: Vec<Event>,
    bwd: Vec<Event>,
}

/// Graph with every degree-2 run collapsed into a single chain.
struct Contracted {
    ids: Vec<usize>,
    chains: Vec<Chain>,
    adj: Vec<Vec<usize>>,
}

fn chain_events(g: &VoronoiGraph, verts: &[usize], passages: &PassageSet) -> Vec<Event> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    for w in verts.windows(2) {
        let (x, y) = (w[0], w[1]);
        let e = g.incident(x).iter().copied().find(|&e| other_end(&g.edges[e], x) == y);
        let Some(e) = e else { continue };
        let edge = &g.edges[e];
        let forward = edge.u == x;
        for c in &edge.crossings {
            let (f, dir) = if forward {
                (c.fraction, c.direction)
            } else {
                (1.0 - c.fraction, -c.direction)
            };
            if !(0.0..=1.0).contains(&f) {
                continue;
            }
            let Some(p) = passages.get(c.passage) else {
                continue;
            };
            let (before, after) = p.span_offsets(dir);
            out.push(Event {
                passage: c.passage,
                offset: acc + f * edge.length,
                direction: dir,
                before,
                after,
                width: p.width,
            });
        }
        acc += edge.length;
    }
    out.sort_by(|a, b| a.offset.total_cmp(&b.offset).then(a.passage.cmp(&b.passage)));
    out
}

fn contract(g: &VoronoiGraph, keep_extra: &[usize], passages: &PassageSet) -> Contracted {
    let n = g.vertex_count();
    let mut keep: Vec<bool> = (0..n).map(|v| g.incident(v).len() != 2).collect();
    for &v in keep_extra {
        keep[v] = true;
    }
    let mut ids = vec![usize::MAX; n];
    let mut originals = Vec::new();
    for v in 0..n {
        if keep[v] {
            ids[v] = originals.len();
            originals.push(v);
        }
    }
    let mut used = vec![false; g.edges.len()];
    let mut chains = Vec::new();
    let mut adj = vec![Vec::new(); originals.len()];
    for &start in &originals {
        for &e0 in g.incident(start) {
            if used[e0] {
                continue;
            }
            used[e0] = true;
            let mut verts = vec![start];
            let mut length = g.edges[e0].length;
            let mut cur = other_end(&g.edges[e0], start);
            verts.push(cur);
            while !keep[cur] {
                let next = g.incident(cur).iter().copied().find(|&e| !used[e]);
                let Some(e) = next else { break };
                used[e] = true;
                length += g.edges[e].length;
                cur = other_end(&g.edges[e], cur);
                verts.push(cur);
            }
            if !keep[cur] {
                continue;
            }
            let (a, b) = (ids[start], ids[cur]);
            let fwd = chain_events(g, &verts, passages);
            let rev: Vec<usize> = verts.iter().rev().copied().collect();
            let bwd = chain_events(g, &rev, passages);
            let id = chains.len();
            chains.push(Chain {
                a,
                b,
                verts,
                length,
                fwd,
                bwd,
            });
            if a != b {
                adj[a].push(id);
                adj[b].push(id);
            }
        }
    }
    Contracted { ids, chains, adj }
}

fn distances_to(c: &Contracted, target: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; c.adj.len()];
    let mut heap = BinaryHeap::new();
    dist[target] = 0.0;
    heap.push(Key {
        f: 0.0,
        len: 0.0,
        vertex: target,
        label: 0,
    });
    while let Some(Key { f, vertex, .. }) = heap.pop() {
        if f > dist[vertex] {
            continue;
        }
        for &ch in &c.adj[vertex] {
            let chain = &c.chains[ch];
            let w = if chain.a == vertex { chain.b } else { chain.a };
            let nd = f + chain.length;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Key {
                    f: nd,
                    len: 0.0,
                    vertex: w,
                    label: 0,
                });
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy)]
struct Label {
    vertex: usize,
    len: f64,
    f_p: f64,
    f_h: f64,
    parent: usize,
    chain: usize,
    forward: bool,
    dead: bool,
}

const ROOT: usize = usize::MAX;

/// Min-heap key: smaller `f`, then smaller `len`, then smaller vertex id.
#[derive(Debug, Clone, Copy)]
struct Key {
    f: f64,
    len: f64,
    vertex: usize,
    label: usize,
}

impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(o.len.total_cmp(&self.len))
            .then(o.vertex.cmp(&self.vertex))
            .then(o.label.cmp(&self.label))
    }
}

struct Search<'a> {
    params: &'a PlannerParams,
    higher: Vec<&'a PassageTimeMap>,
    t0: f64,
    /// Upper bound on the number of conflict terms any continuation can add.
    max_terms: f64,
}

impl Search<'_> {
    fn cost(&self, l: &Label) -> f64 {
        l.len - self.params.lambda_p * l.f_p + self.params.lambda_h * l.f_h
    }

    fn event_conflict(&self, prefix: f64, e: &Event) -> f64 {
        let v = self.params.avg_velocity;
        let t = self.t0 + (prefix + e.offset) / v;
        let span = TimeSpan::new(t - e.before / v, t + e.after / v);
        self.higher
            .iter()
            .map(|m| conflict_index(&span, m, e.passage, self.params.alpha))
            .sum()
    }

    /// `a` is at least as good as `b` for every continuation.
    ///
    /// A shorter prefix reaches later passages earlier; each remaining
    /// conflict term is `|alpha|`-Lipschitz in that shift and bounded by 1.
    fn dominates(&self, a: &Label, b: &Label) -> bool {
        if a.f_p < b.f_p {
            return false;
        }
        let shift = (a.len - b.len).abs() / self.params.avg_velocity;
        let drift = self.max_terms * (self.params.alpha.abs() * shift).min(1.0);
        (a.len - b.len) + self.params.lambda_h * (a.f_h - b.f_h + drift) <= 0.0
    }
}

fn on_path(labels: &[Label], mut id: usize, vertex: usize) -> bool {
    while id != ROOT {
        if labels[id].vertex == vertex {
            return true;
        }
        id = labels[id].parent;
    }
    false
}

/// Finds the minimum-cost path from `start` to `target`, starting at time
/// `t0`, against the time maps of higher priority agents.
///
/// Maps of agents whose index is not smaller than `agent` are ignored.
pub fn plan_path(
    ctx: &PlanContext<'_>,
    agent: usize,
    start: Vec2,
    target: Vec2,
    t0: f64,
    higher_maps: &[PassageTimeMap],
    params: &PlannerParams,
) -> Result<Plan> {
    params.validate()?;
    let (s, t, mut g) = voronoi::attach_endpoints(ctx.graph, start, target, ctx.obstacles)?;
    voronoi::annotate_incident(&mut g, &[s, t], ctx.passages);
    let c = contract(&g, &[s, t], ctx.passages);
    let (cs, ct) = (c.ids[s], c.ids[t]);
    let h = distances_to(&c, ct);
    if !h[cs].is_finite() {
        return Err(Error::Unreachable(format!(
            "agent {agent}: target {target:?} is not connected to start {start:?}"
        )));
    }

    let higher: Vec<&PassageTimeMap> = higher_maps.iter().filter(|m| m.agent < agent).collect();
    let mut max_terms = 0.0;
    if !higher.is_empty() {
        for ch in &c.chains {
            let events = if ch.fwd.len() >= ch.bwd.len() { &ch.fwd } else { &ch.bwd };
            for e in events {
                max_terms += higher.iter().filter(|m| !m.spans(e.passage).is_empty()).count() as f64;
            }
        }
    }
    let search = Search {
        params,
        higher,
        t0,
        max_terms,
    };
    let w0 = params.no_passage_width.unwrap_or(ctx.l_max);

    let mut labels = vec![Label {
        vertex: cs,
        len: 0.0,
        f_p: w0,
        f_h: 0.0,
        parent: ROOT,
        chain: usize::MAX,
        forward: true,
        dead: false,
    }];
    let mut at: Vec<Vec<usize>> = vec![Vec::new(); c.adj.len()];
    at[cs].push(0);
    let mut heap = BinaryHeap::new();
    heap.push(Key {
        f: search.cost(&labels[0]) + h[cs],
        len: 0.0,
        vertex: cs,
        label: 0,
    });

    let found = loop {
        let Some(key) = heap.pop() else {
            return Err(Error::Unreachable(format!(
                "agent {agent}: no simple path from {start:?} to {target:?}"
            )));
        };
        let cur = labels[key.label];
        if cur.dead {
            continue;
        }
        if cur.vertex == ct {
            break key.label;
        }
        for &ch in &c.adj[cur.vertex] {
            let chain = &c.chains[ch];
            let forward = chain.a == cur.vertex;
            let next = if forward { chain.b } else { chain.a };
            if !h[next].is_finite() || on_path(&labels, key.label, next) {
                continue;
            }
            let events = if forward { &chain.fwd } else { &chain.bwd };
            let mut cand = Label {
                vertex: next,
                len: cur.len + chain.length,
                f_p: cur.f_p,
                f_h: cur.f_h,
                parent: key.label,
                chain: ch,
                forward,
                dead: false,
            };
            for e in events {
                cand.f_p = cand.f_p.min(e.width);
                if !search.higher.is_empty() {
                    cand.f_h += search.event_conflict(cur.len, e);
                }
            }
            if at[next].iter().any(|&o| search.dominates(&labels[o], &cand)) {
                continue;
            }
            let id = labels.len();
            at[next].retain(|&o| {
                if search.dominates(&cand, &labels[o]) {
                    labels[o].dead = true;
                    false
                } else {
                    true
                }
            });
            at[next].push(id);
            heap.push(Key {
                f: search.cost(&cand) + h[next],
                len: cand.len,
                vertex: next,
                label: id,
            });
            labels.push(cand);
        }
    };

    let mut hops = Vec::new();
    let mut id = found;
    while labels[id].parent != ROOT {
        hops.push((labels[id].chain, labels[id].forward));
        id = labels[id].parent;
    }
    hops.reverse();
    let mut verts = vec![s];
    let mut crossings = Vec::new();
    let mut prefix = 0.0;
    let v = params.avg_velocity;
    for (ch, forward) in hops {
        let chain = &c.chains[ch];
        let events = if forward { &chain.fwd } else { &chain.bwd };
        for e in events {
            let arc = prefix + e.offset;
            crossings.push(PathCrossing {
                passage: e.passage,
                arc,
                time: t0 + arc / v,
                direction: e.direction,
            });
        }
        if forward {
            verts.extend_from_slice(&chain.verts[1..]);
        } else {
            verts.extend(chain.verts.iter().rev().skip(1));
        }
        prefix += chain.length;
    }
    let points: Vec<Vec2> = verts.iter().map(|&k| g.vertices[k]).collect();
    let mut path = ReferencePath::from_points(agent, &points, t0, v);
    path.crossings = crossings;
    let mut time_map = build_time_map(&path, ctx.passages, v);
    time_map.agent = agent;
    let best = labels[found];
    let cost = CostBreakdown {
        len: best.len,
        f_p: best.f_p,
        f_h: best.f_h,
        total: search.cost(&best),
    };
    Ok(Plan {
        path,
        time_map,
        cost,
        labels: labels.len(),
    })
}
