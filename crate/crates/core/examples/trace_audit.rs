//! Runs the scattered preset, writes its trace as JSON lines, reads it back
//! and audits it independently of the run.
//!
//! `cargo run --release --example trace_audit -- trace.jsonl`

use homoplan::runtime::{run, safety_audit, RunConfig, Trace};
use homoplan::world::presets;

fn main() -> homoplan::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "trace.jsonl".into());
    let s = presets::scattered();
    let cfg = RunConfig::default();
    let out = run(&s, &cfg)?;
    std::fs::write(&path, out.trace.to_jsonl())?;
    let back = Trace::from_jsonl(&std::fs::read_to_string(&path)?, s.params.mpc.h)?;
    let report = safety_audit(&back, &s, cfg.audit_tolerance);
    println!("{} records written to {path}", back.records.len());
    println!(
        "min distance {:.4} m, min gap {:.4} m, min clearance {:.4} m, {} violations",
        report.min_distance, report.min_gap, report.min_clearance, report.violation_count
    );
    Ok(())
}
