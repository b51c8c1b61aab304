//! Scenario definition: bounds, convex obstacles, agents and the parameter
//! sets every stage reads. Scenarios round-trip through a versioned JSON
//! document.

mod generator;
pub mod presets;

pub use generator::{random_scenario, GeneratorParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};
use crate::mpc::MpcParams;
use crate::passage::PassageDetectionParams;
use crate::planner::PlannerParams;
use crate::runtime::ReplanParams;

pub const SCENARIO_VERSION: u32 = 1;

/// Chords per vertex used to approximate the rounded corners of an
/// inflated obstacle.
pub const ARC_SEGMENTS: usize = 8;

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexObstacle {
    pub vertices: Vec<Vec2>,
}

impl ConvexObstacle {
    /// Validates convexity; clockwise input is reversed.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::validation("obstacle", "needs at least 3 vertices"));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i].dist(vertices[(i + 1) % n]) < 1e-12 {
                return Err(Error::validation(
                    "obstacle",
                    format!("duplicate consecutive vertex at position {i}"),
                ));
            }
        }
        if geometry::signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        if !geometry::is_convex_ccw(&vertices) {
            return Err(Error::validation("obstacle", "polygon is not convex"));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle from its lower-left and upper-right corners.
    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Self {
            vertices: vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
        }
    }

    /// Rectangle of the given size centred at `c` and rotated by `angle`.
    pub fn rotated_rect(c: Vec2, size: Vec2, angle: f64) -> Self {
        let hx = size.x / 2.0;
        let hy = size.y / 2.0;
        let corners = [
            Vec2::new(-hx, -hy),
            Vec2::new(hx, -hy),
            Vec2::new(hx, hy),
            Vec2::new(-hx, hy),
        ];
        Self {
            vertices: corners.iter().map(|&p| c + p.rotate(angle)).collect(),
        }
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        geometry::perimeter(&self.vertices)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        geometry::contains(&self.vertices, p, 0.0)
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        geometry::distance_to_polygon(&self.vertices, p)
    }

    pub fn translated(&self, by: Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + by).collect(),
        }
    }
}

/// Conservative polygonal Minkowski sum of `obstacle` with a disk of radius
/// `r`, using [`ARC_SEGMENTS`] tangent chords per corner.
pub fn inflate_obstacle(obstacle: &ConvexObstacle, r: f64) -> ConvexObstacle {
    inflate_with_segments(obstacle, r, ARC_SEGMENTS)
}

pub fn inflate_with_segments(obstacle: &ConvexObstacle, r: f64, arc_segments: usize) -> ConvexObstacle {
    if r <= 0.0 {
        return obstacle.clone();
    }
    let v = &obstacle.vertices;
    let n = v.len();
    let m = arc_segments.max(1);
    let mut pts = Vec::with_capacity(n * m);
    for i in 0..n {
        let prev = v[(i + n - 1) % n];
        let cur = v[i];
        let next = v[(i + 1) % n];
        let e_in = cur - prev;
        let e_out = next - cur;
        let a0 = e_in.y.atan2(e_in.x) - std::f64::consts::FRAC_PI_2;
        let a1 = e_out.y.atan2(e_out.x) - std::f64::consts::FRAC_PI_2;
        let turn = (a1 - a0).rem_euclid(std::f64::consts::TAU);
        if turn < 1e-12 {
            pts.push(cur + Vec2::from_angle(a0) * r);
            continue;
        }
        // Tangent lines at a0, a0+θ, ..., a1 meet at radius r / cos(θ/2).
        let step = turn / m as f64;
        let reach = r / (step / 2.0).cos();
        for j in 0..m {
            pts.push(cur + Vec2::from_angle(a0 + (j as f64 + 0.5) * step) * reach);
        }
    }
    ConvexObstacle {
        vertices: geometry::convex_hull(&pts),
    }
}

/// Axis-aligned rectangle serialized as `{min: [x, y], max: [x, y]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p.x >= self.min.x - tol && p.x <= self.max.x + tol && p.y >= self.min.y - tol && p.y <= self.max.y + tol
    }

    /// Bounds moved inwards by `r` on every side.
    pub fn shrunk(&self, r: f64) -> Self {
        Self::new(self.min + Vec2::new(r, r), self.max - Vec2::new(r, r))
    }

    /// Boundary as a CCW polygon.
    pub fn corners(&self) -> Vec<Vec2> {
        vec![
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// Priority index; 1 is the highest priority.
    pub index: usize,
    pub start: Vec2,
    pub target: Vec2,
    pub radius: f64,
    pub avg_velocity: f64,
}

/// Every tunable parameter a scenario may override. Missing fields fall back
/// to the defaults of each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub planner: PlannerParams,
    pub passage: PassageDetectionParams,
    /// Voronoi sampling resolution in meters.
    pub graph_resolution: f64,
    pub mpc: MpcParams,
    pub replan: ReplanParams,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            planner: PlannerParams::default(),
            passage: PassageDetectionParams::default(),
            graph_resolution: 0.1,
            mpc: MpcParams::default(),
            replan: ReplanParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bounds: Bounds,
    pub obstacles: Vec<ConvexObstacle>,
    /// Sorted by index; `agents[k].index == k + 1`.
    pub agents: Vec<AgentSpec>,
    pub params: ScenarioParams,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    homoplan_scenario: u32,
    bounds: Bounds,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
    agents: Vec<AgentSpec>,
    #[serde(default)]
    params: ScenarioParams,
}

#[derive(Serialize, Deserialize)]
struct ObstacleDoc {
    vertices: Vec<Vec2>,
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    if doc.homoplan_scenario != SCENARIO_VERSION {
        return Err(Error::Parse(format!(
            "unsupported scenario version {}",
            doc.homoplan_scenario
        )));
    }
    let obstacles = doc
        .obstacles
        .into_iter()
        .enumerate()
        .map(|(i, o)| {
            ConvexObstacle::new(o.vertices).map_err(|e| match e {
                Error::Validation { reason, .. } => Error::validation(format!("obstacle {i}"), reason),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(doc.bounds, obstacles, doc.agents, doc.params)
}

impl Scenario {
    /// Builds and validates a scenario. Agents may be given in any order.
    pub fn new(
        bounds: Bounds,
        obstacles: Vec<ConvexObstacle>,
        mut agents: Vec<AgentSpec>,
        params: ScenarioParams,
    ) -> Result<Self> {
        agents.sort_by_key(|a| a.index);
        let s = Self {
            bounds,
            obstacles,
            agents,
            params,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.min.x < b.max.x && b.min.y < b.max.y) {
            return Err(Error::validation("bounds", "min must be below max"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !geometry::is_convex_ccw(&o.vertices) {
                return Err(Error::validation(format!("obstacle {i}"), "polygon is not convex CCW"));
            }
            if o.vertices.iter().any(|&v| !b.contains(v, 1e-9)) {
                return Err(Error::validation(format!("obstacle {i}"), "lies outside bounds"));
            }
        }
        for (k, a) in self.agents.iter().enumerate() {
            let name = format!("agent {}", a.index);
            if a.index != k + 1 {
                return Err(Error::validation(
                    name,
                    format!("indices must be 1..={} without gaps", self.agents.len()),
                ));
            }
            if !(a.radius > 0.0) {
                return Err(Error::validation(name, "radius must be positive"));
            }
            if !(a.avg_velocity > 0.0) {
                return Err(Error::validation(name, "avg_velocity must be positive"));
            }
            for (what, p) in [("start", a.start), ("target", a.target)] {
                if !p.is_finite() || !b.contains(p, 0.0) {
                    return Err(Error::validation(name, format!("{what} lies outside bounds")));
                }
                for (oi, o) in self.obstacles.iter().enumerate() {
                    let inflated = inflate_obstacle(o, a.radius);
                    if geometry::contains(&inflated.vertices, p, -1e-9) {
                        return Err(Error::validation(
                            name,
                            format!("{what} lies inside inflated obstacle {oi}"),
                        ));
                    }
                }
            }
        }
        for i in 0..self.agents.len() {
            for j in i + 1..self.agents.len() {
                let (a, c) = (&self.agents[i], &self.agents[j]);
                if a.start.dist(c.start) < a.radius + c.radius {
                    return Err(Error::validation(
                        format!("agent {}", c.index),
                        format!("start overlaps agent {}", a.index),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Obstacles inflated by the (largest) agent radius.
    pub fn inflated_obstacles(&self) -> Vec<ConvexObstacle> {
        self.inflated_by(self.max_radius())
    }

    pub fn inflated_by(&self, r: f64) -> Vec<ConvexObstacle> {
        self.obstacles.iter().map(|o| inflate_obstacle(o, r)).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.agents.iter().map(|a| a.radius).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let doc = ScenarioDoc {
            homoplan_scenario: SCENARIO_VERSION,
            bounds: self.bounds,
            obstacles: self
                .obstacles
                .iter()
                .map(|o| ObstacleDoc {
                    vertices: o.vertices.clone(),
                })
                .collect(),
            agents: self.agents.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("scenario serializes")
    }
}
