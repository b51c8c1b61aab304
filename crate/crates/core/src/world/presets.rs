//! Hand-built maps used by the examples, the CLI `gen` command and the
//! acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{random_scenario, AgentSpec, Bounds, ConvexObstacle, GeneratorParams, Scenario, ScenarioParams};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const PRESETS: &[&str] = &["scattered", "corridor4", "dense6x6"];

/// Resolves a preset by name. `seed` drives the random generator for
/// `dense6x6` and the start jitter of `corridor4`; `scattered` ignores it.
pub fn by_name(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "scattered" => Ok(scattered()),
        "corridor4" => Ok(corridor4(seed)),
        "dense6x6" => random_scenario(seed, &GeneratorParams::dense6x6()),
        other => Err(Error::validation(
            "preset",
            format!("unknown preset {other:?} (expected one of {PRESETS:?})"),
        )),
    }
}

fn agent(index: usize, start: Vec2, target: Vec2) -> AgentSpec {
    AgentSpec {
        index,
        start,
        target,
        radius: 0.2,
        avg_velocity: 0.5,
    }
}

/// 5.0 m x 4.5 m map with 7 scattered obstacles; 8 agents on the perimeter
/// swap with the agent diametrically opposite.
pub fn scattered() -> Scenario {
    let bounds = Bounds::new(Vec2::ZERO, Vec2::new(5.0, 4.5));
    let obstacles = vec![
        ConvexObstacle::rotated_rect(Vec2::new(2.5, 2.25), Vec2::new(0.5, 0.5), std::f64::consts::FRAC_PI_4),
        ConvexObstacle::rotated_rect(Vec2::new(1.35, 1.3), Vec2::new(0.7, 0.4), 0.0),
        ConvexObstacle::rotated_rect(Vec2::new(3.65, 1.3), Vec2::new(0.4, 0.7), 0.0),
        ConvexObstacle::rotated_rect(Vec2::new(1.35, 3.2), Vec2::new(0.4, 0.7), 0.0),
        ConvexObstacle::rotated_rect(Vec2::new(3.65, 3.2), Vec2::new(0.7, 0.4), 0.0),
        ConvexObstacle::rotated_rect(Vec2::new(2.5, 1.2), Vec2::new(0.4, 0.35), 0.3),
        ConvexObstacle::rotated_rect(Vec2::new(2.5, 3.3), Vec2::new(0.4, 0.35), -0.3),
    ];
    let center = Vec2::new(2.5, 2.25);
    let starts = [
        Vec2::new(0.4, 0.4),
        Vec2::new(2.5, 0.25),
        Vec2::new(4.6, 0.4),
        Vec2::new(4.65, 2.25),
        Vec2::new(4.6, 4.1),
        Vec2::new(2.5, 4.25),
        Vec2::new(0.4, 4.1),
        Vec2::new(0.35, 2.25),
    ];
    let agents = starts
        .iter()
        .enumerate()
        .map(|(k, &s)| agent(k + 1, s, center * 2.0 - s))
        .collect();
    Scenario::new(bounds, obstacles, agents, ScenarioParams::default()).expect("scattered preset is valid")
}

/// Vertical wall band split into four corridors, each one agent wide.
/// Four agents on each side swap through it; `seed` jitters the starts by
/// up to 5 cm.
pub fn corridor4(seed: u64) -> Scenario {
    let (w, h) = (6.0, 5.0);
    let bounds = Bounds::new(Vec2::ZERO, Vec2::new(w, h));
    let gap = 0.6;
    let piece = (h - 4.0 * gap) / 5.0;
    let obstacles = (0..5)
        .map(|k| {
            let y0 = k as f64 * (piece + gap);
            ConvexObstacle::rect(Vec2::new(2.2, y0), Vec2::new(3.8, y0 + piece))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Vec2::new(w / 2.0, h / 2.0);
    let rows = [0.7, 1.9, 3.1, 4.3];
    let mut agents = Vec::with_capacity(8);
    for (k, &y) in rows.iter().enumerate() {
        for (side, x) in [(0, 0.6), (1, w - 0.6)] {
            let base = Vec2::new(x, if side == 0 { y } else { h - y });
            let jitter = Vec2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
            let start = base + jitter;
            agents.push(agent(2 * k + side + 1, start, center * 2.0 - start));
        }
    }
    let mut params = ScenarioParams::default();
    params.replan.gamma = 0.9;
    Scenario::new(bounds, obstacles, agents, params).expect("corridor preset is valid")
}
