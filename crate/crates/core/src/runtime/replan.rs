use serde::{Deserialize, Serialize};

use crate::passage::PassageSet;
use crate::planner::{build_time_map, score_path, PassageTimeMap, ReferencePath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplanParams {
    /// Time-error threshold, s.
    pub beta: f64,
    /// Conflict score above which the global path is replanned.
    pub gamma: f64,
    /// Lower bound of the re-estimated average velocity, as a fraction of
    /// the nominal one.
    pub min_speed_ratio: f64,
    /// Time without moving `stall_distance` after which the global path is
    /// replanned regardless of the conflict score, s.
    pub stall_time: f64,
    pub stall_distance: f64,
}

impl Default for ReplanParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 1.5,
            min_speed_ratio: 0.4,
            stall_time: 4.0,
            stall_distance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanDecision {
    None,
    Retime,
    Replan,
}

/// What the agent knows when it runs the check.
#[derive(Debug, Clone, Copy)]
pub struct ReplanInputs<'a> {
    pub path: &'a ReferencePath,
    pub map: &'a PassageTimeMap,
    /// Latest maps of the other agents (lower priorities are ignored).
    pub others: &'a [PassageTimeMap],
    pub passages: &'a PassageSet,
    pub alpha: f64,
    pub delta_t: f64,
    /// Whether a higher-priority map changed since the last check.
    pub higher_changed: bool,
    pub v_new: f64,
    pub t_now: f64,
    /// Arc length of the agent's projection onto its path.
    pub s_now: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanOutcome {
    pub decision: ReplanDecision,
    pub score: Option<f64>,
    /// Set whenever the time error crossed the threshold: the re-timed path
    /// and its map, which must be broadcast.
    pub updated: Option<(ReferencePath, PassageTimeMap)>,
}

/// Drops spans that ended before `t_now`.
pub fn upcoming(map: &PassageTimeMap, t_now: f64) -> PassageTimeMap {
    let mut out = map.clone();
    out.entries = map
        .entries
        .iter()
        .filter_map(|(&id, spans)| {
            let keep: Vec<_> = spans.iter().copied().filter(|s| s.end >= t_now).collect();
            (!keep.is_empty()).then_some((id, keep))
        })
        .collect();
    out
}

/// Time error: distance to the reference point divided by its speed.
pub fn time_error(path: &ReferencePath, p: crate::Vec2, t_now: f64) -> f64 {
    path.position_at(t_now).dist(p) / path.avg_velocity
}

/// Average speed over `s_now` meters covered in `elapsed` seconds, bounded
/// below by `floor`.
pub fn measured_velocity(s_now: f64, elapsed: f64, nominal: f64, floor: f64) -> f64 {
    if elapsed <= 0.0 {
        return nominal.max(floor);
    }
    (s_now / elapsed).clamp(floor, nominal.max(floor))
}

/// Decides between replanning, re-timing and doing nothing.
pub fn replan_check(inp: &ReplanInputs<'_>, params: &ReplanParams) -> ReplanOutcome {
    let higher: Vec<PassageTimeMap> = inp.others.iter().filter(|m| m.agent < inp.map.agent).cloned().collect();
    if inp.delta_t >= params.beta {
        let path = inp.path.retimed(inp.s_now, inp.t_now, inp.v_new);
        let mut map = upcoming(&build_time_map(&path, inp.passages, inp.v_new), inp.t_now);
        map.agent = inp.map.agent;
        map.version = inp.map.version + 1;
        let score = score_path(&map, &higher, inp.alpha);
        let decision = if score > params.gamma {
            ReplanDecision::Replan
        } else {
            ReplanDecision::Retime
        };
        return ReplanOutcome {
            decision,
            score: Some(score),
            updated: Some((path, map)),
        };
    }
    if inp.higher_changed {
        let score = score_path(&upcoming(inp.map, inp.t_now), &higher, inp.alpha);
        let decision = if score > params.gamma {
            ReplanDecision::Replan
        } else {
            ReplanDecision::None
        };
        return ReplanOutcome {
            decision,
            score: Some(score),
            updated: None,
        };
    }
    ReplanOutcome {
        decision: ReplanDecision::None,
        score: None,
        updated: None,
    }
}
