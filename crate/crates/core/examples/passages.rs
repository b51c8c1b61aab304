//! Detects the complete passages of the scattered preset and prints their
//! geometry.
//!
//! `cargo run --example passages`

use homoplan::passage::detect_world_passages;
use homoplan::world::presets;

fn main() {
    let s = presets::scattered();
    let r = s.max_radius();
    let set = detect_world_passages(&s.inflated_by(r), &s.bounds, r, &s.params.passage);
    let n = s.obstacles.len();
    let name = |k: usize| {
        if k < n {
            format!("obstacle {k}")
        } else {
            format!("wall {}", k - n)
        }
    };
    println!("{} passages (obstacles inflated by {r} m)", set.len());
    for p in set.iter() {
        println!(
            "  {} / {}: width {:.3} m, depth {:.3} m in, {:.3} m out, narrowest at ({:.2}, {:.2})",
            name(p.id.s),
            name(p.id.c),
            p.width,
            p.entrance_depth(),
            p.exit_depth(),
            p.narrowest.midpoint().x,
            p.narrowest.midpoint().y
        );
    }
}
