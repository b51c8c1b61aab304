//! Multi-agent execution: every agent plans a global path, tracks it with
//! the local controller and exchanges time maps and trajectories over a bus.
//!
//! Two schedulers are provided. `Lockstep` steps the agents in index order
//! and delivers messages at the end of each tick, so runs are reproducible.
//! `Concurrent` runs each agent on its own thread; agents share a clock but
//! read whatever messages have arrived when their tick starts.

mod agent;
mod bus;
mod replan;
mod trace;

use std::sync::mpsc;
use std::sync::{Arc, Barrier, Mutex};

use serde::{Deserialize, Serialize};

pub use agent::{AgentRuntime, StepOutput, StepTimings};
pub use bus::{BusMessage, BusView, Payload, PayloadKind};
pub use replan::{
    measured_velocity, replan_check, time_error, upcoming, ReplanDecision, ReplanInputs, ReplanOutcome, ReplanParams,
};
pub use trace::{
    safety_audit, AgentMode, AgentRecord, BusRecord, SafetyReport, SolverRecord, Trace, TraceRecord, Violation,
    AUDIT_SUBSTEPS,
};

use crate::error::Result;
use crate::mpc::SolveStatus;
use crate::passage::{detect_world_passages, PassageSet};
use crate::planner::{PlanContext, PlannerParams};
use crate::voronoi::{annotate_crossings, build_graph, VoronoiGraph};
use crate::world::{inflate_obstacle, ConvexObstacle, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerVariant {
    /// Full cost: length, passage width and time conflicts.
    Homotopy,
    /// Length and passage width only.
    HomotopyNoTime,
    /// Shortest path on the roadmap.
    #[serde(alias = "astar-baseline")]
    #[value(alias = "astar-baseline")]
    Astar,
}

impl PlannerVariant {
    pub fn apply(self, base: &PlannerParams) -> PlannerParams {
        let mut p = base.clone();
        match self {
            PlannerVariant::Homotopy => {}
            PlannerVariant::HomotopyNoTime => p.lambda_h = 0.0,
            PlannerVariant::Astar => {
                p.lambda_p = 0.0;
                p.lambda_h = 0.0;
            }
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Lockstep,
    Concurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub planner: PlannerVariant,
    pub replan: bool,
    /// Simulated seconds before the run is stopped.
    pub timeout: f64,
    /// Distance to the target at which an agent counts as arrived.
    pub goal_tolerance: f64,
    pub mode: ExecMode,
    /// Slack allowed by the safety audit, m.
    pub audit_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            planner: PlannerVariant::Homotopy,
            replan: true,
            timeout: 100.0,
            goal_tolerance: 0.1,
            mode: ExecMode::Lockstep,
            audit_tolerance: 1e-3,
        }
    }
}

impl RunConfig {
    /// Label used in reports, e.g. `homotopy+replan`.
    pub fn arm(&self) -> String {
        let base = match self.planner {
            PlannerVariant::Homotopy => "homotopy",
            PlannerVariant::HomotopyNoTime => "homotopy-no-time",
            PlannerVariant::Astar => "astar",
        };
        if self.replan {
            format!("{base}+replan")
        } else {
            base.to_string()
        }
    }
}

struct Layer {
    radius: f64,
    obstacles: Vec<ConvexObstacle>,
    graph: VoronoiGraph,
    mpc_obstacles: Vec<ConvexObstacle>,
}

/// Scenario with its passages and one annotated roadmap per distinct agent
/// radius.
pub struct PreparedWorld {
    pub scenario: Scenario,
    pub passages: PassageSet,
    layers: Vec<Layer>,
}

impl PreparedWorld {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let params = &scenario.params;
        // one passage set shared by all agents so that time maps compare
        let r_max = scenario.max_radius();
        let passages = detect_world_passages(&scenario.inflated_by(r_max), &scenario.bounds, r_max, &params.passage);
        let mut radii: Vec<f64> = scenario.agents.iter().map(|a| a.radius).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let layers = radii
            .into_iter()
            .map(|radius| {
                let obstacles = scenario.inflated_by(radius);
                let graph = build_graph(&obstacles, &scenario.bounds.shrunk(radius), params.graph_resolution)?;
                let margin = radius + params.mpc.safety_margin;
                Ok(Layer {
                    radius,
                    graph: annotate_crossings(&graph, &passages),
                    obstacles,
                    mpc_obstacles: scenario.obstacles.iter().map(|o| inflate_obstacle(o, margin)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario: scenario.clone(),
            passages,
            layers,
        })
    }

    fn layer(&self, radius: f64) -> &Layer {
        self.layers
            .iter()
            .find(|l| l.radius == radius)
            .unwrap_or(&self.layers[self.layers.len() - 1])
    }

    pub fn context(&self, radius: f64) -> PlanContext<'_> {
        let l = self.layer(radius);
        PlanContext {
            graph: &l.graph,
            obstacles: &l.obstacles,
            passages: &self.passages,
            l_max: self.scenario.params.passage.l_max,
        }
    }

    pub fn graph(&self, radius: f64) -> &VoronoiGraph {
        &self.layer(radius).graph
    }

    /// Obstacles inflated by `radius` plus the controller's safety margin.
    pub fn mpc_obstacles(&self, radius: f64) -> &[ConvexObstacle] {
        &self.layer(radius).mpc_obstacles
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub count: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        Self {
            count: ms.len(),
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            max_ms: ms.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub index: usize,
    pub reached: bool,
    pub arrival_time: Option<f64>,
    /// Distance travelled, m.
    pub length: f64,
    pub replans: usize,
    /// No global path was found.
    pub plan_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub arm: String,
    pub success: bool,
    pub swarm_rate: f64,
    /// Latest arrival time when every agent arrived.
    pub makespan: Option<f64>,
    pub agents: Vec<AgentOutcome>,
    pub replans: usize,
    pub ticks: u64,
    pub soft_solves: usize,
    pub fallback_solves: usize,
    pub safety: SafetyReport,
    pub plan_timing: TimingStats,
    pub mpc_timing: TimingStats,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub trace: Trace,
}

#[derive(Default)]
struct Collected {
    records: Vec<TraceRecord>,
    plan_ms: Vec<f64>,
    mpc_ms: Vec<f64>,
}

impl Collected {
    fn push(&mut self, out: &StepOutput) {
        self.records.push(TraceRecord::Agent(out.record.clone()));
        self.push_messages(&out.messages);
        self.plan_ms.extend(out.timings.plan_ms);
        self.mpc_ms.push(out.timings.mpc_ms);
    }

    fn push_messages(&mut self, messages: &[BusMessage]) {
        for m in messages {
            self.records.push(TraceRecord::Bus(BusRecord {
                tick: m.tick,
                sender: m.sender,
                payload: m.payload.kind(),
                version: m.version,
            }));
        }
    }
}

fn done(a: &AgentRuntime) -> bool {
    a.reached || a.failed
}

fn final_record(a: &AgentRuntime, tick: u64) -> TraceRecord {
    TraceRecord::Agent(AgentRecord {
        tick,
        t: a.state.t,
        i: a.index(),
        p: a.state.p,
        v: a.state.v,
        u: crate::Vec2::ZERO,
        mode: AgentMode::Final,
        replan_flag: false,
        solver: SolverRecord {
            iters: 0,
            status: SolveStatus::Optimal,
            fallback: false,
        },
    })
}

/// Simulates the whole team until every agent has arrived or failed, or
/// the timeout elapses.
pub fn run(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutput> {
    let world = PreparedWorld::new(scenario)?;
    run_prepared(&world, cfg)
}

/// Same as `run` with the roadmap already built.
pub fn run_prepared(world: &PreparedWorld, cfg: &RunConfig) -> Result<RunOutput> {
    let (agents, collected, ticks) = match cfg.mode {
        ExecMode::Lockstep => lockstep(world, cfg),
        ExecMode::Concurrent => concurrent(world, cfg),
    };
    let trace = Trace {
        h: world.scenario.params.mpc.h,
        records: collected.records,
    };
    let result = summarize(
        world,
        cfg,
        &agents,
        &trace,
        &collected.plan_ms,
        &collected.mpc_ms,
        ticks,
    );
    Ok(RunOutput { result, trace })
}

fn max_ticks(world: &PreparedWorld, cfg: &RunConfig) -> u64 {
    (cfg.timeout / world.scenario.params.mpc.h).round() as u64
}

fn lockstep(world: &PreparedWorld, cfg: &RunConfig) -> (Vec<AgentRuntime>, Collected, u64) {
    let mut agents: Vec<AgentRuntime> = world
        .scenario
        .agents
        .iter()
        .map(|s| AgentRuntime::new(s.clone(), world, cfg))
        .collect();
    let mut view = BusView::default();
    let mut col = Collected::default();

    // initial plans in priority order, each visible to the next agent
    for a in agents.iter_mut() {
        let (ms, msg) = a.plan(0, world, &view);
        col.plan_ms.push(ms);
        let msgs = [msg, a.trajectory_message(0)];
        col.push_messages(&msgs);
        for m in &msgs {
            view.apply(m);
        }
    }

    let limit = max_ticks(world, cfg);
    let mut tick = 0;
    while tick < limit && !agents.iter().all(done) {
        let mut pending = Vec::new();
        for a in agents.iter_mut() {
            let out = a.step(tick, world, &view, cfg);
            col.push(&out);
            pending.extend(out.messages);
        }
        for m in &pending {
            view.apply(m);
        }
        tick += 1;
    }
    for a in &agents {
        col.records.push(final_record(a, tick));
    }
    (agents, col, tick)
}

fn concurrent(world: &PreparedWorld, cfg: &RunConfig) -> (Vec<AgentRuntime>, Collected, u64) {
    let n = world.scenario.agents.len();
    let limit = max_ticks(world, cfg);
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| mpsc::channel::<BusMessage>()).unzip();
    let barrier = Barrier::new(n);
    let status = Arc::new(Mutex::new(vec![false; n]));

    let results: Vec<(AgentRuntime, Collected, u64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = receivers
            .into_iter()
            .enumerate()
            .map(|(k, rx)| {
                let senders = senders.clone();
                let spec = world.scenario.agents[k].clone();
                let barrier = &barrier;
                let status = Arc::clone(&status);
                scope.spawn(move || {
                    let mut me = AgentRuntime::new(spec, world, cfg);
                    let mut view = BusView::default();
                    let mut col = Collected::default();
                    let broadcast = |msgs: &[BusMessage]| {
                        for m in msgs {
                            for s in &senders {
                                // a finished peer may have dropped its receiver
                                let _ = s.send(m.clone());
                            }
                        }
                    };
                    // wait for every higher-priority initial plan
                    while (1..me.index()).any(|j| view.map_version(j) == 0) {
                        match rx.recv() {
                            Ok(m) => view.apply(&m),
                            Err(_) => break,
                        }
                    }
                    let (ms, msg) = me.plan(0, world, &view);
                    col.plan_ms.push(ms);
                    let msgs = [msg, me.trajectory_message(0)];
                    col.push_messages(&msgs);
                    broadcast(&msgs);
                    barrier.wait();

                    let mut tick = 0;
                    loop {
                        let all_done = status.lock().expect("status lock").iter().all(|&d| d);
                        barrier.wait();
                        if tick >= limit || all_done {
                            break;
                        }
                        while let Ok(m) = rx.try_recv() {
                            view.apply(&m);
                        }
                        let out = me.step(tick, world, &view, cfg);
                        broadcast(&out.messages);
                        col.push(&out);
                        status.lock().expect("status lock")[k] = done(&me);
                        barrier.wait();
                        tick += 1;
                    }
                    col.records.push(final_record(&me, tick));
                    (me, col, tick)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("agent thread panicked"))
            .collect()
    });

    let mut col = Collected::default();
    let mut agents = Vec::with_capacity(n);
    let mut ticks = 0;
    for (a, c, t) in results {
        agents.push(a);
        col.records.extend(c.records);
        col.plan_ms.extend(c.plan_ms);
        col.mpc_ms.extend(c.mpc_ms);
        ticks = t;
    }
    col.records.sort_by_key(record_key);
    (agents, col, ticks)
}

fn record_key(r: &TraceRecord) -> (u64, u8, usize, u8) {
    match r {
        TraceRecord::Agent(a) => (a.tick, 0, a.i, 0),
        TraceRecord::Bus(b) => (b.tick, 1, b.sender, b.payload as u8),
    }
}

fn summarize(
    world: &PreparedWorld,
    cfg: &RunConfig,
    agents: &[AgentRuntime],
    trace: &Trace,
    plan_ms: &[f64],
    mpc_ms: &[f64],
    ticks: u64,
) -> RunResult {
    let h = trace.h;
    let mut outcomes: Vec<AgentOutcome> = agents
        .iter()
        .map(|a| AgentOutcome {
            index: a.index(),
            reached: false,
            arrival_time: None,
            length: 0.0,
            replans: a.replans,
            plan_failed: a.failed,
        })
        .collect();
    let (mut soft, mut fallback) = (0, 0);
    for r in trace.agent_records() {
        let Some(o) = outcomes.iter_mut().find(|o| o.index == r.i) else {
            continue;
        };
        let target = world.scenario.agents[r.i - 1].target;
        if o.arrival_time.is_none() && r.p.dist(target) <= cfg.goal_tolerance {
            o.arrival_time = Some(r.t);
            o.reached = true;
        }
        if r.mode == AgentMode::Final {
            continue;
        }
        match r.solver.status {
            SolveStatus::Soft => soft += 1,
            SolveStatus::Fallback => fallback += 1,
            SolveStatus::Optimal => {}
        }
        let mut prev = r.p;
        for m in 1..=AUDIT_SUBSTEPS {
            let tau = h * m as f64 / AUDIT_SUBSTEPS as f64;
            let p = r.p + r.v * tau + r.u * (0.5 * tau * tau);
            o.length += prev.dist(p);
            prev = p;
        }
    }
    let reached = outcomes.iter().filter(|o| o.reached).count();
    let success = reached == outcomes.len();
    RunResult {
        arm: cfg.arm(),
        success,
        swarm_rate: reached as f64 / outcomes.len().max(1) as f64,
        makespan: success.then(|| outcomes.iter().filter_map(|o| o.arrival_time).fold(0.0, f64::max)),
        replans: outcomes.iter().map(|o| o.replans).sum(),
        agents: outcomes,
        ticks,
        soft_solves: soft,
        fallback_solves: fallback,
        safety: safety_audit(trace, &world.scenario, cfg.audit_tolerance),
        plan_timing: TimingStats::from_samples(plan_ms),
        mpc_timing: TimingStats::from_samples(mpc_ms),
    }
}
