//! Runs two arms on a few corridor seeds and prints the aggregated table.
//!
//! `cargo run --release --example batch_report`

use homoplan::harness::{aggregate, batch_scenarios, render_table, run_batch, thread_count, Arm, BatchConfig};
use homoplan::runtime::PlannerVariant;

fn main() -> homoplan::Result<()> {
    let cfg = BatchConfig {
        preset: Some("corridor4".into()),
        seeds: vec![0, 1, 2],
        files: vec![],
        arms: vec![
            Arm {
                planner: PlannerVariant::Homotopy,
                replan: true,
            },
            Arm {
                planner: PlannerVariant::Homotopy,
                replan: false,
            },
        ],
        repetitions: 1,
        output: "batch-out".into(),
        timeout: Some(60.0),
    };
    cfg.validate()?;
    let rows = run_batch(&cfg, &batch_scenarios(&cfg)?, thread_count())?;
    for r in &rows {
        println!(
            "{} seed {:?} {}: {}/{} reached, {} replans",
            r.scenario, r.seed, r.arm, r.reached, r.agents, r.replans
        );
    }
    print!("{}", render_table(&aggregate(&rows)));
    Ok(())
}
