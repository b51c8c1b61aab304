//! Generates dense 6x6 scenarios and summarizes them.
//!
//! `cargo run --example generate -- 0 5` covers seeds 0 through 4.

use homoplan::world::{random_scenario, GeneratorParams};

fn main() -> homoplan::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let first = args.first().copied().unwrap_or(0);
    let count = args.get(1).copied().unwrap_or(3);
    let params = GeneratorParams::dense6x6();
    for seed in first..first + count {
        let s = random_scenario(seed, &params)?;
        let area: f64 = s.obstacles.iter().map(|o| o.area()).sum();
        let trips: f64 = s.agents.iter().map(|a| a.start.dist(a.target)).sum();
        println!(
            "seed {seed}: {} obstacles covering {:.2} m2, {} agents, {:.1} m of straight-line travel",
            s.obstacles.len(),
            area,
            s.agents.len(),
            trips
        );
    }
    Ok(())
}
