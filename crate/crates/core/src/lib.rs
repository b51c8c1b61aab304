pub mod error;
pub mod geometry;
pub mod harness;
pub mod mpc;
pub mod passage;
pub mod planner;
pub mod runtime;
pub mod voronoi;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Segment, Vec2};
pub use world::{load_scenario, AgentSpec, Bounds, ConvexObstacle, Scenario, ScenarioParams};
