//! Plans two agents in priority order through the corridor map. The second
//! agent sees the first one's passage time map and picks its corridor
//! accordingly.
//!
//! `cargo run --example homotopy_plan`

use homoplan::passage::detect_world_passages;
use homoplan::planner::{plan_path, Plan, PlanContext, PlannerParams};
use homoplan::voronoi::{annotate_crossings, build_graph};
use homoplan::world::presets;

fn show(plan: &Plan) {
    let c = plan.cost;
    println!(
        "agent {}: length {:.2} m, min width {:.2} m, conflict {:.3}, cost {:.2}, {} labels",
        plan.path.agent, c.len, c.f_p, c.f_h, c.total, plan.labels
    );
    for x in &plan.path.crossings {
        let span = plan.time_map.spans(x.passage);
        println!("  passage {:?} at {:.1} s, occupied {:?}", x.passage, x.time, span);
    }
}

fn main() -> homoplan::Result<()> {
    let s = presets::corridor4(0);
    let r = s.max_radius();
    let obstacles = s.inflated_by(r);
    let passages = detect_world_passages(&obstacles, &s.bounds, r, &s.params.passage);
    let graph = annotate_crossings(
        &build_graph(&obstacles, &s.bounds.shrunk(r), s.params.graph_resolution)?,
        &passages,
    );
    let ctx = PlanContext {
        graph: &graph,
        obstacles: &obstacles,
        passages: &passages,
        l_max: s.params.passage.l_max,
    };
    let mut maps = Vec::new();
    for spec in s.agents.iter().take(2) {
        let params = PlannerParams {
            avg_velocity: spec.avg_velocity,
            ..s.params.planner.clone()
        };
        let plan = plan_path(&ctx, spec.index, spec.start, spec.target, 0.0, &maps, &params)?;
        show(&plan);
        maps.push(plan.time_map);
    }
    Ok(())
}
