use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bus::PayloadKind;
use crate::error::Result;
use crate::geometry::{self, Vec2};
use crate::mpc::SolveStatus;
use crate::world::Scenario;

/// Sub-samples per control interval used by the audit.
pub const AUDIT_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Tracking,
    /// A planned position was inside an inflated obstacle.
    Recovery,
    Reached,
    /// No global path could be found.
    Failed,
    /// State after the last tick; no input is applied.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub iters: usize,
    pub status: SolveStatus,
    pub fallback: bool,
}

/// State of one agent at the start of a tick and the input it applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub tick: u64,
    pub t: f64,
    pub i: usize,
    pub p: Vec2,
    pub v: Vec2,
    pub u: Vec2,
    pub mode: AgentMode,
    pub replan_flag: bool,
    pub solver: SolverRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub tick: u64,
    pub sender: usize,
    pub payload: PayloadKind,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Agent(AgentRecord),
    Bus(BusRecord),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub h: f64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn agent_records(&self) -> impl Iterator<Item = &AgentRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Agent(a) => Some(a),
            TraceRecord::Bus(_) => None,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str, h: f64) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<TraceRecord>, _>>()?;
        Ok(Self { h, records })
    }

    /// Positions of every agent record at `AUDIT_SUBSTEPS` instants of its
    /// interval, as `(tick, substep, agent, position)`.
    pub fn samples(&self) -> Vec<(u64, usize, usize, Vec2)> {
        let mut out = Vec::new();
        for r in self.agent_records() {
            let n = if r.mode == AgentMode::Final { 1 } else { AUDIT_SUBSTEPS };
            for m in 0..n {
                let tau = self.h * m as f64 / AUDIT_SUBSTEPS as f64;
                out.push((r.tick, m, r.i, r.p + r.v * tau + r.u * (0.5 * tau * tau)));
            }
        }
        out.sort_by_key(|s| (s.0, s.1, s.2));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Agents {
        t: f64,
        i: usize,
        j: usize,
        distance: f64,
    },
    Obstacle {
        t: f64,
        i: usize,
        obstacle: usize,
        clearance: f64,
    },
    Wall {
        t: f64,
        i: usize,
        clearance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    /// Smallest center distance between two agents.
    pub min_distance: f64,
    /// Smallest center distance minus the sum of radii.
    pub min_gap: f64,
    /// Smallest distance from an agent's disk to an obstacle or wall;
    /// negative on penetration.
    pub min_clearance: f64,
    pub violation_count: usize,
    /// The first violations found, at most `MAX_REPORTED`.
    pub violations: Vec<Violation>,
}

impl SafetyReport {
    pub const MAX_REPORTED: usize = 50;

    pub fn is_safe(&self) -> bool {
        self.violation_count == 0
    }
}

/// Checks every pair of agents and every agent against the obstacles and
/// walls at `AUDIT_SUBSTEPS` instants per control interval. Distances
/// shorter than required by more than `tolerance` are flagged.
pub fn safety_audit(trace: &Trace, scenario: &Scenario, tolerance: f64) -> SafetyReport {
    let radius = |i: usize| scenario.agents.get(i.wrapping_sub(1)).map_or(0.0, |a| a.radius);
    let mut report = SafetyReport {
        min_distance: f64::INFINITY,
        min_gap: f64::INFINITY,
        min_clearance: f64::INFINITY,
        violation_count: 0,
        violations: Vec::new(),
    };
    let flag = |report: &mut SafetyReport, v: Violation| {
        report.violation_count += 1;
        if report.violations.len() < SafetyReport::MAX_REPORTED {
            report.violations.push(v);
        }
    };
    let samples = trace.samples();
    let b = &scenario.bounds;
    let mut lo = 0;
    while lo < samples.len() {
        let (tick, m) = (samples[lo].0, samples[lo].1);
        let mut hi = lo;
        while hi < samples.len() && samples[hi].0 == tick && samples[hi].1 == m {
            hi += 1;
        }
        let t = tick as f64 * trace.h + trace.h * m as f64 / AUDIT_SUBSTEPS as f64;
        let group = &samples[lo..hi];
        for (k, &(_, _, i, p)) in group.iter().enumerate() {
            let r = radius(i);
            for &(_, _, j, q) in &group[k + 1..] {
                let d = p.dist(q);
                report.min_distance = report.min_distance.min(d);
                report.min_gap = report.min_gap.min(d - r - radius(j));
                if d < r + radius(j) - tolerance {
                    flag(&mut report, Violation::Agents { t, i, j, distance: d });
                }
            }
            for (o, obs) in scenario.obstacles.iter().enumerate() {
                let c = geometry::signed_distance(&obs.vertices, p) - r;
                report.min_clearance = report.min_clearance.min(c);
                if c < -tolerance {
                    flag(
                        &mut report,
                        Violation::Obstacle {
                            t,
                            i,
                            obstacle: o,
                            clearance: c,
                        },
                    );
                }
            }
            let wall = (p.x - b.min.x).min(b.max.x - p.x).min(p.y - b.min.y).min(b.max.y - p.y) - r;
            report.min_clearance = report.min_clearance.min(wall);
            if wall < -tolerance {
                flag(&mut report, Violation::Wall { t, i, clearance: wall });
            }
        }
        lo = hi;
    }
    report
}
