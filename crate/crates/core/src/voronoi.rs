//! Discretized generalized Voronoi graph of the inflated obstacle set.
//!
//! Obstacle and workspace boundaries are sampled densely, the point-site
//! Voronoi diagram of the samples is taken from a Delaunay triangulation,
//! and only the Voronoi edges separating samples of *different* obstacles
//! are kept. What remains approximates the boundaries of the obstacle
//! cells.

use std::collections::HashMap;

use delaunator::{next_halfedge, triangulate, Point, EMPTY};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};
use crate::passage::{PassageId, PassageSet};
use crate::world::{Bounds, ConvexObstacle};

/// Owner label of the workspace boundary.
pub const WALL: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageCrossing {
    pub passage: PassageId,
    /// Position of the crossing along the edge, from `u` (0) to `v` (1).
    pub fraction: f64,
    /// +1 when travelling `u -> v` moves along the passage axis, else -1.
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
    pub crossings: Vec<PassageCrossing>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoronoiGraph {
    pub vertices: Vec<Vec2>,
    pub edges: Vec<GraphEdge>,
    /// The two nearest obstacles of each vertex ([`WALL`] for the boundary).
    pub owners: Vec<[usize; 2]>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct GraphExport<'a> {
    vertices: &'a [Vec2],
    edges: Vec<[usize; 2]>,
}

impl VoronoiGraph {
    /// Assembles a graph from explicit vertices and `(u, v)` pairs; edge
    /// lengths are the Euclidean distances.
    pub fn from_parts(vertices: Vec<Vec2>, pairs: &[(usize, usize)]) -> Self {
        let mut g = VoronoiGraph {
            owners: vec![[WALL, WALL]; vertices.len()],
            adjacency: vec![Vec::new(); vertices.len()],
            vertices,
            edges: Vec::new(),
        };
        for &(u, v) in pairs {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_vertex(&mut self, p: Vec2, owners: [usize; 2]) -> usize {
        self.vertices.push(p);
        self.owners.push(owners);
        self.adjacency.push(Vec::new());
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> usize {
        let length = self.vertices[u].dist(self.vertices[v]);
        self.edges.push(GraphEdge {
            u,
            v,
            length,
            crossings: Vec::new(),
        });
        let id = self.edges.len() - 1;
        self.adjacency[u].push(id);
        if u != v {
            self.adjacency[v].push(id);
        }
        id
    }

    /// Edge ids incident to `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_segment(&self, e: usize) -> (Vec2, Vec2) {
        let edge = &self.edges[e];
        (self.vertices[edge.u], self.vertices[edge.v])
    }

    /// Debug export `{vertices: [[x, y], ...], edges: [[u, v], ...]}`.
    pub fn to_json(&self) -> String {
        let export = GraphExport {
            vertices: &self.vertices,
            edges: self.edges.iter().map(|e| [e.u, e.v]).collect(),
        };
        serde_json::to_string(&export).expect("graph serializes")
    }

    /// Number of connected components (isolated vertices included).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.vertices.len()];
        let mut count = 0;
        for s in 0..self.vertices.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(x) = stack.pop() {
                for &e in &self.adjacency[x] {
                    let y = other_end(&self.edges[e], x);
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        count
    }
}

pub(crate) fn other_end(e: &GraphEdge, x: usize) -> usize {
    if e.u == x {
        e.v
    } else {
        e.u
    }
}

fn sample_boundary(poly: &[Vec2], step: f64, label: usize, out: &mut Vec<(Vec2, usize)>) {
    for (a, b) in geometry::edges(poly) {
        let n = ((a.dist(b) / step).ceil() as usize).max(1);
        for k in 0..n {
            out.push((a.lerp(b, k as f64 / n as f64), label));
        }
    }
}

fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let ab = b - a;
    let ac = c - a;
    let d = 2.0 * ab.cross(ac);
    if d.abs() < 1e-18 {
        return Vec2::new(f64::NAN, f64::NAN);
    }
    let ux = (ac.y * ab.norm_sq() - ab.y * ac.norm_sq()) / d;
    let uy = (ab.x * ac.norm_sq() - ac.x * ab.norm_sq()) / d;
    a + Vec2::new(ux, uy)
}

fn in_free_space(p: Vec2, obstacles: &[ConvexObstacle]) -> bool {
    obstacles.iter().all(|o| !geometry::contains(&o.vertices, p, -1e-9))
}

fn segment_free(a: Vec2, b: Vec2, obstacles: &[ConvexObstacle]) -> bool {
    obstacles
        .iter()
        .all(|o| !geometry::segment_penetrates(&o.vertices, a, b, 1e-9))
}

/// Distances to each obstacle and to the wall, returning the two nearest
/// owner labels.
fn nearest_owners(p: Vec2, obstacles: &[ConvexObstacle], bounds: &Bounds) -> [usize; 2] {
    let wall = (p.x - bounds.min.x)
        .min(bounds.max.x - p.x)
        .min(p.y - bounds.min.y)
        .min(bounds.max.y - p.y);
    let mut best = [(wall, WALL), (f64::INFINITY, WALL)];
    for (i, o) in obstacles.iter().enumerate() {
        let d = o.distance_to(p);
        if d < best[0].0 {
            best[1] = best[0];
            best[0] = (d, i);
        } else if d < best[1].0 {
            best[1] = (d, i);
        }
    }
    [best[0].1, best[1].1]
}

/// Builds the Voronoi roadmap of `obstacles` (already inflated) inside
/// `bounds`, with vertex spacing at most `resolution`.
pub fn build_graph(obstacles: &[ConvexObstacle], bounds: &Bounds, resolution: f64) -> Result<VoronoiGraph> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidResolution(resolution));
    }
    if obstacles.is_empty() {
        return Ok(lattice(bounds, resolution));
    }
    let step = resolution / 2.0;
    let mut sites = Vec::new();
    for (i, o) in obstacles.iter().enumerate() {
        sample_boundary(&o.vertices, step, i, &mut sites);
    }
    sample_boundary(&bounds.corners(), step, WALL, &mut sites);

    let points: Vec<Point> = sites.iter().map(|(p, _)| Point { x: p.x, y: p.y }).collect();
    let tri = triangulate(&points);
    let ntri = tri.triangles.len() / 3;
    let centers: Vec<Vec2> = (0..ntri)
        .map(|t| {
            let [a, b, c] = [0, 1, 2].map(|k| sites[tri.triangles[3 * t + k]].0);
            circumcenter(a, b, c)
        })
        .collect();
    let usable: Vec<bool> = centers
        .iter()
        .map(|&c| c.is_finite() && bounds.contains(c, -1e-9) && in_free_space(c, obstacles))
        .collect();

    let mut graph = VoronoiGraph::default();
    let mut vertex_of: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vid = |g: &mut VoronoiGraph, p: Vec2| -> usize {
        let key = ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
        *vertex_of.entry(key).or_insert_with(|| g.add_vertex(p, [WALL, WALL]))
    };
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for e in 0..tri.halfedges.len() {
        let twin = tri.halfedges[e];
        if twin == EMPTY || twin < e {
            continue;
        }
        let la = sites[tri.triangles[e]].1;
        let lb = sites[tri.triangles[next_halfedge(e)]].1;
        if la == lb {
            continue;
        }
        let (t0, t1) = (e / 3, twin / 3);
        if !usable[t0] || !usable[t1] {
            continue;
        }
        let (a, b) = (centers[t0], centers[t1]);
        if !segment_free(a, b, obstacles) {
            continue;
        }
        let u = vid(&mut graph, a);
        let v = vid(&mut graph, b);
        if u != v {
            pairs.push((u.min(v), u.max(v)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    for (u, v) in pairs {
        let (a, b) = (graph.vertices[u], graph.vertices[v]);
        let pieces = (a.dist(b) / resolution).ceil().max(1.0) as usize;
        let mut prev = u;
        for k in 1..pieces {
            let mid = graph.add_vertex(a.lerp(b, k as f64 / pieces as f64), [WALL, WALL]);
            graph.add_edge(prev, mid);
            prev = mid;
        }
        graph.add_edge(prev, v);
    }
    for i in 0..graph.vertices.len() {
        graph.owners[i] = nearest_owners(graph.vertices[i], obstacles, bounds);
    }
    Ok(graph)
}

/// 8-connected lattice over the bounds, used when there are no obstacles.
fn lattice(bounds: &Bounds, resolution: f64) -> VoronoiGraph {
    let nx = (bounds.width() / resolution).floor() as usize + 1;
    let ny = (bounds.height() / resolution).floor() as usize + 1;
    let mut g = VoronoiGraph::default();
    for j in 0..ny {
        for i in 0..nx {
            let p = bounds.min + Vec2::new(i as f64 * resolution, j as f64 * resolution);
            g.add_vertex(p, [WALL, WALL]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                g.add_edge(id(i, j), id(i + 1, j));
            }
            if j + 1 < ny {
                g.add_edge(id(i, j), id(i, j + 1));
                if i + 1 < nx {
                    g.add_edge(id(i, j), id(i + 1, j + 1));
                }
                if i > 0 {
                    g.add_edge(id(i, j), id(i - 1, j + 1));
                }
            }
        }
    }
    g
}

/// Returns the ids of the vertices that `start` and `target` were attached
/// to, plus the augmented graph.
///
/// Each endpoint is connected to the nearest vertex reachable by a
/// collision-free straight segment; an endpoint that coincides with a
/// vertex reuses it.
pub fn attach_endpoints(
    graph: &VoronoiGraph,
    start: Vec2,
    target: Vec2,
    obstacles: &[ConvexObstacle],
) -> Result<(usize, usize, VoronoiGraph)> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut g = graph.clone();
    let s = attach_one(&mut g, graph, start, obstacles, "start")?;
    let t = attach_one(&mut g, graph, target, obstacles, "target")?;
    Ok((s, t, g))
}

fn attach_one(
    g: &mut VoronoiGraph,
    base: &VoronoiGraph,
    p: Vec2,
    obstacles: &[ConvexObstacle],
    what: &str,
) -> Result<usize> {
    let mut order: Vec<(f64, usize)> = base.vertices.iter().enumerate().map(|(i, v)| (v.dist(p), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (d, i) in order {
        if d < 1e-9 {
            return Ok(i);
        }
        if segment_free(p, base.vertices[i], obstacles) {
            let owners = base.owners[i];
            let new = g.add_vertex(p, owners);
            g.add_edge(new, i);
            return Ok(new);
        }
    }
    Err(Error::Unreachable(format!(
        "no collision-free connector from {what} {p:?}"
    )))
}

/// Crossings of the segment `a -> b` with every narrowest segment, sorted by
/// fraction then passage id.
pub fn edge_crossings(a: Vec2, b: Vec2, passages: &PassageSet) -> Vec<PassageCrossing> {
    let mut out = Vec::new();
    let (lo, hi) = (
        Vec2::new(a.x.min(b.x), a.y.min(b.y)),
        Vec2::new(a.x.max(b.x), a.y.max(b.y)),
    );
    for p in passages.iter() {
        let n = &p.narrowest;
        if n.a.x.max(n.b.x) < lo.x - 1e-9
            || n.a.x.min(n.b.x) > hi.x + 1e-9
            || n.a.y.max(n.b.y) < lo.y - 1e-9
            || n.a.y.min(n.b.y) > hi.y + 1e-9
        {
            continue;
        }
        // points on the line count as the positive side so that a path
        // through a vertex on the segment crosses it exactly once
        let side = |q: Vec2| (n.b - n.a).cross(q - n.a) >= 0.0;
        if side(a) == side(b) {
            continue;
        }
        if let Some((t, _)) = geometry::segment_intersection(a, b, n.a, n.b) {
            let along = (b - a).dot(p.axis());
            out.push(PassageCrossing {
                passage: p.id,
                fraction: t,
                direction: if along < 0.0 { -1 } else { 1 },
            });
        }
    }
    out.sort_by(|x, y| x.fraction.total_cmp(&y.fraction).then(x.passage.cmp(&y.passage)));
    out
}

/// Annotates every edge with the narrowest segments it crosses.
pub fn annotate_crossings(graph: &VoronoiGraph, passages: &PassageSet) -> VoronoiGraph {
    let mut g = graph.clone();
    for e in 0..g.edges.len() {
        let (a, b) = g.edge_segment(e);
        g.edges[e].crossings = edge_crossings(a, b, passages);
    }
    g
}

/// Annotates only the edges incident to the given vertices (used after
/// attaching endpoints to an already annotated graph).
pub fn annotate_incident(graph: &mut VoronoiGraph, vertices: &[usize], passages: &PassageSet) {
    for &v in vertices {
        for k in 0..graph.adjacency[v].len() {
            let e = graph.adjacency[v][k];
            let (a, b) = graph.edge_segment(e);
            graph.edges[e].crossings = edge_crossings(a, b, passages);
        }
    }
}
