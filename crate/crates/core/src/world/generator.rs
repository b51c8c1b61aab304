use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentSpec, Bounds, ConvexObstacle, Scenario, ScenarioParams};
use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};

/// Settings for the seeded crowded-map generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub width: f64,
    pub height: f64,
    pub obstacle_count: usize,
    /// Range of the obstacle bounding extent in meters.
    pub size_min: f64,
    pub size_max: f64,
    /// Minimum raw gap between two obstacles.
    pub min_gap: f64,
    /// Minimum raw gap between an obstacle and the workspace boundary.
    pub wall_gap: f64,
    /// Width of the obstacle-free strips along the left and right walls
    /// where agents spawn.
    pub spawn_band: f64,
    pub agent_count: usize,
    pub agent_radius: f64,
    pub avg_velocity: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self::dense6x6()
    }
}

impl GeneratorParams {
    /// 6 m x 6 m map with 19 obstacles and 8 agents swapping sides.
    pub fn dense6x6() -> Self {
        Self {
            width: 6.0,
            height: 6.0,
            obstacle_count: 19,
            size_min: 0.3,
            size_max: 0.6,
            min_gap: 0.5,
            wall_gap: 0.3,
            spawn_band: 0.8,
            agent_count: 8,
            agent_radius: 0.2,
            avg_velocity: 0.5,
            max_attempts: 200_000,
        }
    }
}

/// Failed placements in a row before the layout is discarded and restarted.
const RESTART_AFTER: usize = 500;

/// Generates a crowded scenario as a pure function of `(seed, params)`.
///
/// Agents are split between the left and right walls at evenly spaced
/// heights; each one targets the start of the agent mirrored through the
/// map centre.
pub fn random_scenario(seed: u64, params: &GeneratorParams) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = Bounds::new(Vec2::ZERO, Vec2::new(params.width, params.height));
    let agents = place_agents(params)?;

    let lo = Vec2::new(params.spawn_band, params.wall_gap);
    let hi = Vec2::new(params.width - params.spawn_band, params.height - params.wall_gap);
    if lo.x >= hi.x || lo.y >= hi.y {
        return Err(Error::Placement {
            what: "spawn band leaves no room for obstacles".into(),
            attempts: 0,
        });
    }

    let mut obstacles: Vec<ConvexObstacle> = Vec::with_capacity(params.obstacle_count);
    let mut attempts = 0;
    let mut stalled = 0;
    while obstacles.len() < params.obstacle_count {
        attempts += 1;
        stalled += 1;
        if stalled > RESTART_AFTER {
            obstacles.clear();
            stalled = 0;
        }
        if attempts > params.max_attempts {
            return Err(Error::Placement {
                what: format!("obstacle {} of {}", obstacles.len() + 1, params.obstacle_count),
                attempts: params.max_attempts,
            });
        }
        let cand = random_polygon(&mut rng, params);
        let fits = cand
            .vertices
            .iter()
            .all(|v| v.x >= lo.x && v.x <= hi.x && v.y >= lo.y && v.y <= hi.y);
        if !fits {
            continue;
        }
        let clear = obstacles
            .iter()
            .all(|o| geometry::polygon_distance(&o.vertices, &cand.vertices) >= params.min_gap);
        let agents_clear = agents
            .iter()
            .all(|a| cand.distance_to(a.start) >= 2.0 * a.radius && cand.distance_to(a.target) >= 2.0 * a.radius);
        if clear && agents_clear {
            obstacles.push(cand);
            stalled = 0;
        }
    }
    Scenario::new(bounds, obstacles, agents, ScenarioParams::default())
}

fn place_agents(params: &GeneratorParams) -> Result<Vec<AgentSpec>> {
    let n = params.agent_count;
    let per_side = n.div_ceil(2);
    let x_left = params.spawn_band / 2.0;
    let spacing = params.height / per_side.max(1) as f64;
    if spacing < 2.0 * params.agent_radius + 1e-9 || x_left < params.agent_radius {
        return Err(Error::Placement {
            what: format!("{n} agents do not fit along the walls"),
            attempts: 0,
        });
    }
    let center = Vec2::new(params.width / 2.0, params.height / 2.0);
    let mut agents = Vec::with_capacity(n);
    for k in 0..n {
        let row = (k / 2) as f64;
        let left = Vec2::new(x_left, spacing * (row + 0.5));
        let start = if k % 2 == 0 { left } else { center * 2.0 - left };
        agents.push(AgentSpec {
            index: k + 1,
            start,
            target: center * 2.0 - start,
            radius: params.agent_radius,
            avg_velocity: params.avg_velocity,
        });
    }
    Ok(agents)
}

/// Either a rotated rectangle or the hull of points jittered around an
/// ellipse.
fn random_polygon(rng: &mut ChaCha8Rng, p: &GeneratorParams) -> ConvexObstacle {
    let c = Vec2::new(rng.gen_range(0.0..p.width), rng.gen_range(0.0..p.height));
    let a = rng.gen_range(p.size_min..=p.size_max);
    let b = rng.gen_range(p.size_min..=p.size_max);
    let angle = rng.gen_range(0.0..std::f64::consts::PI);
    if rng.gen_bool(0.5) {
        ConvexObstacle::rotated_rect(c, Vec2::new(a, b), angle)
    } else {
        let k = rng.gen_range(5..=7);
        let pts: Vec<Vec2> = (0..k)
            .map(|i| {
                let t = (i as f64 + rng.gen_range(-0.3..0.3)) * std::f64::consts::TAU / k as f64;
                c + Vec2::new(t.cos() * a / 2.0, t.sin() * b / 2.0).rotate(angle)
            })
            .collect();
        ConvexObstacle {
            vertices: geometry::convex_hull(&pts),
        }
    }
}
