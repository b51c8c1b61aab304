//! Builds the Voronoi roadmap of the corridor map and reports how its edges
//! cross the passages.
//!
//! `cargo run --example roadmap -- graph.json` writes the graph as JSON.

use homoplan::passage::detect_world_passages;
use homoplan::voronoi::{annotate_crossings, build_graph};
use homoplan::world::presets;

fn main() -> homoplan::Result<()> {
    let s = presets::corridor4(0);
    let r = s.max_radius();
    let obstacles = s.inflated_by(r);
    let passages = detect_world_passages(&obstacles, &s.bounds, r, &s.params.passage);
    let graph = build_graph(&obstacles, &s.bounds.shrunk(r), s.params.graph_resolution)?;
    let graph = annotate_crossings(&graph, &passages);
    let crossing_edges = graph.edges.iter().filter(|e| !e.crossings.is_empty()).count();
    println!(
        "{} vertices, {} edges, {} component(s), {} edges cross one of {} passages",
        graph.vertex_count(),
        graph.edges.len(),
        graph.component_count(),
        crossing_edges,
        passages.len()
    );
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, graph.to_json())?;
        println!("wrote {path}");
    }
    Ok(())
}
