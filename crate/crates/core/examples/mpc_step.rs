//! Solves one MPC horizon for an agent heading at a wall-like half-plane
//! and prints the planned states.
//!
//! `cargo run --example mpc_step`

use homoplan::mpc::{solve_mpc, tractive_points, AgentState, ConstraintSource, Hyperplane, MpcParams};
use homoplan::planner::ReferencePath;
use homoplan::voronoi::WALL;
use homoplan::Vec2;

fn main() {
    let params = MpcParams::default();
    let d = params.dynamics();
    let x0 = AgentState::at_rest(Vec2::ZERO, 0.0);
    let path = ReferencePath::from_points(1, &[Vec2::ZERO, Vec2::new(3.0, 1.0)], 0.0, 0.8);
    let tractive = tractive_points(&path, 0.0, d.k, d.h);
    // keep y <= 0.15 over the whole horizon
    let planes: Vec<Hyperplane> = (1..=d.k)
        .map(|step| Hyperplane {
            a: Vec2::new(0.0, -1.0),
            b: -0.15,
            step,
            source: ConstraintSource::Obstacle(WALL),
        })
        .collect();
    let traj = solve_mpc(&x0, &planes, &tractive, &d, &params.weights());
    println!(
        "{:?} after {} iterations, objective {:.4}",
        traj.info.status, traj.info.iterations, traj.info.objective
    );
    for (k, (x, u)) in traj.states.iter().zip(&traj.inputs).enumerate() {
        println!(
            "  k={:2}  p=({:.3}, {:.3})  v=({:.3}, {:.3})  u=({:.3}, {:.3})",
            k + 1,
            x.p.x,
            x.p.y,
            x.v.x,
            x.v.y,
            u.x,
            u.y
        );
    }
}
