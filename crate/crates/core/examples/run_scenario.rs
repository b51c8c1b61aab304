//! Runs a preset with the full pipeline and prints the outcome.
//!
//! `cargo run --release --example run_scenario -- dense6x6 3 homotopy`

use homoplan::runtime::{run, PlannerVariant, RunConfig};
use homoplan::world::presets;

fn main() -> homoplan::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset = args.first().map_or("scattered", String::as_str);
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let planner = match args.get(2).map(String::as_str) {
        Some("astar") => PlannerVariant::Astar,
        Some("no-time") => PlannerVariant::HomotopyNoTime,
        _ => PlannerVariant::Homotopy,
    };
    let replan = args.get(3).is_none_or(|s| s != "no-replan");
    let scenario = presets::by_name(preset, seed)?;
    let cfg = RunConfig {
        planner,
        replan,
        ..RunConfig::default()
    };
    let out = run(&scenario, &cfg)?;
    let r = &out.result;
    println!("{} on {preset} (seed {seed})", r.arm);
    for a in &r.agents {
        println!(
            "  agent {}: reached {} at {:?}, {:.2} m, {} replans",
            a.index, a.reached, a.arrival_time, a.length, a.replans
        );
    }
    println!(
        "success {}  makespan {:?}  min distance {:.4}  min clearance {:.4}  violations {}",
        r.success, r.makespan, r.safety.min_distance, r.safety.min_clearance, r.safety.violation_count
    );
    println!(
        "plan {:.1} ms max ({} calls)  mpc {:.2} ms mean / {:.2} ms max  soft {}  fallback {}",
        r.plan_timing.max_ms,
        r.plan_timing.count,
        r.mpc_timing.mean_ms,
        r.mpc_timing.max_ms,
        r.soft_solves,
        r.fallback_solves
    );
    Ok(())
}
