use std::collections::BTreeMap;
use std::time::Instant;

use super::bus::{BusMessage, BusView, Payload};
use super::replan::{measured_velocity, replan_check, time_error, ReplanDecision, ReplanInputs};
use super::trace::{AgentMode, AgentRecord, SolverRecord};
use super::{PreparedWorld, RunConfig};
use crate::geometry::Vec2;
use crate::mpc::{
    bvc_hyperplanes, corridor_hyperplanes, tractive_points, AgentState, ConstraintSource, Hyperplane, MpcSolver,
    SolveStatus, Trajectory,
};
use crate::planner::{PassageTimeMap, PlannerParams, ReferencePath};
use crate::voronoi::WALL;
use crate::world::AgentSpec;

/// Wall-clock durations measured during one tick, in milliseconds.
#[derive(Debug, Clone, Default)]
pub struct StepTimings {
    pub plan_ms: Option<f64>,
    pub mpc_ms: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub record: AgentRecord,
    pub messages: Vec<BusMessage>,
    pub timings: StepTimings,
}

/// One agent's local state. It only learns about the others through the
/// bus view it is handed each tick.
#[derive(Debug, Clone)]
pub struct AgentRuntime {
    pub spec: AgentSpec,
    pub state: AgentState,
    pub path: Option<ReferencePath>,
    pub map: PassageTimeMap,
    pub traj: Trajectory,
    pub reached: bool,
    pub failed: bool,
    pub replans: usize,
    solver: MpcSolver,
    planner: PlannerParams,
    replan_flag: bool,
    /// Start time of the current global plan.
    plan_t0: f64,
    /// Arc length of the last projection onto the path.
    s_now: f64,
    /// Map versions of higher-priority agents already accounted for.
    seen: BTreeMap<usize, u64>,
    /// Position and time of the last noticeable progress.
    anchor: (Vec2, f64),
}

impl AgentRuntime {
    pub fn new(spec: AgentSpec, world: &PreparedWorld, cfg: &RunConfig) -> Self {
        let params = &world.scenario.params;
        let state = AgentState::at_rest(spec.start, 0.0);
        let mut planner = cfg.planner.apply(&params.planner);
        planner.avg_velocity = spec.avg_velocity;
        Self {
            traj: Trajectory::hold(spec.index, state, params.mpc.horizon, params.mpc.h),
            map: PassageTimeMap::new(spec.index),
            spec,
            state,
            path: None,
            reached: false,
            failed: false,
            replans: 0,
            solver: MpcSolver::from_params(&params.mpc),
            planner,
            replan_flag: true,
            plan_t0: 0.0,
            s_now: 0.0,
            seen: BTreeMap::new(),
            anchor: (state.p, 0.0),
        }
    }

    pub fn index(&self) -> usize {
        self.spec.index
    }

    fn mark_seen(&mut self, view: &BusView) {
        for (&j, m) in view.maps.range(..self.index()) {
            self.seen.insert(j, m.version);
        }
    }

    fn higher_changed(&self, view: &BusView) -> bool {
        view.maps
            .range(..self.index())
            .any(|(j, m)| self.seen.get(j).is_none_or(|&v| v < m.version))
    }

    fn map_message(&self, tick: u64) -> BusMessage {
        BusMessage {
            sender: self.index(),
            version: self.map.version,
            tick,
            payload: Payload::TimeMap(self.map.clone()),
        }
    }

    /// The current trajectory as a bus message.
    pub fn trajectory_message(&self, tick: u64) -> BusMessage {
        BusMessage {
            sender: self.index(),
            version: self.traj.version,
            tick,
            payload: Payload::Trajectory(self.traj.clone()),
        }
    }

    /// Plans a global path from the current state. Returns the planning time
    /// and the map message to broadcast.
    pub fn plan(&mut self, tick: u64, world: &PreparedWorld, view: &BusView) -> (f64, BusMessage) {
        let started = Instant::now();
        let ctx = world.context(self.spec.radius);
        let higher = view.maps_vec();
        let result = crate::planner::plan_path(
            &ctx,
            self.index(),
            self.state.p,
            self.spec.target,
            self.state.t,
            &higher,
            &self.planner,
        );
        let ms = started.elapsed().as_secs_f64() * 1e3;
        self.mark_seen(view);
        let version = self.map.version + 1;
        match result {
            Ok(plan) => {
                if self.path.is_some() {
                    self.replans += 1;
                }
                self.path = Some(plan.path);
                self.map = plan.time_map;
                self.plan_t0 = self.state.t;
                self.s_now = 0.0;
            }
            Err(_) if self.path.is_some() => {}
            Err(_) => {
                self.failed = true;
                self.map = PassageTimeMap::new(self.index());
            }
        }
        self.replan_flag = false;
        self.anchor = (self.state.p, self.state.t);
        self.map.agent = self.index();
        self.map.version = version;
        (ms, self.map_message(tick))
    }

    fn walls(&self, world: &PreparedWorld, plan: &Trajectory, r: f64) -> Vec<Hyperplane> {
        let b = &world.scenario.bounds;
        let sides = [
            (Vec2::new(1.0, 0.0), b.min.x + r),
            (Vec2::new(-1.0, 0.0), -(b.max.x - r)),
            (Vec2::new(0.0, 1.0), b.min.y + r),
            (Vec2::new(0.0, -1.0), -(b.max.y - r)),
        ];
        (1..=plan.states.len())
            .flat_map(|step| {
                sides.iter().map(move |&(a, off)| Hyperplane {
                    a,
                    b: off,
                    step,
                    source: ConstraintSource::Obstacle(WALL),
                })
            })
            .collect()
    }

    /// One control tick: optional global replan, local solve, execution of
    /// the first input and the replan check.
    pub fn step(&mut self, tick: u64, world: &PreparedWorld, view: &BusView, cfg: &RunConfig) -> StepOutput {
        let params = &world.scenario.params;
        let h = params.mpc.h;
        let k = params.mpc.horizon;
        let mut messages = Vec::new();
        let mut timings = StepTimings::default();

        let replanned = self.replan_flag && !self.failed && !self.reached;
        if replanned {
            let (ms, msg) = self.plan(tick, world, view);
            timings.plan_ms = Some(ms);
            messages.push(msg);
        }
        self.replan_flag = false;

        let r_eff = self.spec.radius + params.mpc.safety_margin;
        let prediction = self.traj.prediction(&self.state, k);
        let mut planes = bvc_hyperplanes(&prediction, &view.other_trajectories(self.index()), r_eff);
        let (corridor, recovery) = corridor_hyperplanes(
            &prediction,
            world.mpc_obstacles(self.spec.radius),
            params.mpc.n_near,
            params.mpc.near_radius,
        );
        planes.extend(corridor);
        planes.extend(self.walls(world, &prediction, r_eff));
        let tractive = match (&self.path, self.reached || self.failed) {
            (Some(path), false) => tractive_points(path, self.state.t, k, h),
            _ if self.failed => vec![self.state.p; k],
            _ => vec![self.spec.target; k],
        };
        let started = Instant::now();
        let mut traj = self.solver.solve(self.index(), &self.state, &planes, &tractive);
        timings.mpc_ms = started.elapsed().as_secs_f64() * 1e3;
        traj.version = self.traj.version + 1;
        messages.push(BusMessage {
            sender: self.index(),
            version: traj.version,
            tick,
            payload: Payload::Trajectory(traj.clone()),
        });

        let mode = if self.failed {
            AgentMode::Failed
        } else if self.reached {
            AgentMode::Reached
        } else if recovery {
            AgentMode::Recovery
        } else {
            AgentMode::Tracking
        };
        let record = AgentRecord {
            tick,
            t: self.state.t,
            i: self.index(),
            p: self.state.p,
            v: self.state.v,
            u: traj.inputs[0],
            mode,
            replan_flag: replanned,
            solver: SolverRecord {
                iters: traj.info.iterations,
                status: traj.info.status,
                fallback: traj.info.status == SolveStatus::Fallback,
            },
        };
        self.state = traj.states[0];
        self.traj = traj;

        if self.state.p.dist(self.spec.target) <= cfg.goal_tolerance {
            self.reached = true;
        }
        if cfg.replan && !self.reached && !self.failed {
            if let Some(msg) = self.check(tick, world, view) {
                messages.push(msg);
            }
        }
        StepOutput {
            record,
            messages,
            timings,
        }
    }

    fn check(&mut self, tick: u64, world: &PreparedWorld, view: &BusView) -> Option<BusMessage> {
        let params = &world.scenario.params;
        let path = self.path.as_ref()?;
        let t_now = self.state.t;
        let reach = params.mpc.v_max * params.mpc.h * 2.0 + 0.2;
        let (s_now, _) = path.project_within(self.state.p, self.s_now - 0.2, self.s_now + reach);
        self.s_now = s_now;
        let nominal = self.planner.avg_velocity;
        let v_new = measured_velocity(
            s_now,
            t_now - self.plan_t0,
            nominal,
            params.replan.min_speed_ratio * nominal,
        );
        let others = view.maps_vec();
        let outcome = replan_check(
            &ReplanInputs {
                path,
                map: &self.map,
                others: &others,
                passages: &world.passages,
                alpha: self.planner.alpha,
                delta_t: time_error(path, self.state.p, t_now),
                higher_changed: self.higher_changed(view),
                v_new,
                t_now,
                s_now,
            },
            &params.replan,
        );
        self.mark_seen(view);
        if self.state.p.dist(self.anchor.0) > params.replan.stall_distance {
            self.anchor = (self.state.p, t_now);
        }
        if outcome.decision == ReplanDecision::Replan || t_now - self.anchor.1 >= params.replan.stall_time {
            self.replan_flag = true;
        }
        let (path, map) = outcome.updated?;
        if outcome.decision == ReplanDecision::Retime {
            self.path = Some(path);
        }
        self.map = map;
        Some(self.map_message(tick))
    }
}
