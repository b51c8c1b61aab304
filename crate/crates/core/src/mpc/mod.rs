//! Receding-horizon trajectory optimization for a double integrator.
//!
//! Inputs are the only decision variables; positions and velocities are
//! affine in them, so each solve is a small dense QP. Both norm bounds are
//! replaced by inscribed 16-gons.

pub mod qp;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{self, Vec2};
use crate::planner::ReferencePath;
use crate::world::ConvexObstacle;
use qp::{QpProblem, QpSettings, QpStatus};

/// Facets of the polygon replacing each norm cone.
pub const CONE_FACETS: usize = 16;
/// Slack magnitude below which a softened solution counts as hard-feasible.
const SLACK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub h: f64,
    pub k: usize,
    pub u_max: f64,
    pub v_max: f64,
    pub theta_u: [[f64; 2]; 2],
    pub theta_v: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcWeights {
    /// Tracking weights `Q_1..Q_K`.
    pub q: Vec<f64>,
    /// Effort weights `R_0..R_{K-1}`.
    pub r: Vec<f64>,
}

impl MpcWeights {
    pub fn uniform(k: usize, q: f64, q_terminal: f64, r: f64) -> Self {
        let mut qs = vec![q; k];
        if let Some(last) = qs.last_mut() {
            *last = q_terminal;
        }
        Self { q: qs, r: vec![r; k] }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            q: self.q.iter().map(|x| x * s).collect(),
            r: self.r.iter().map(|x| x * s).collect(),
        }
    }
}

/// Options of the QP backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Penalty per squared slack once hyperplanes are softened.
    pub soft_penalty: f64,
    /// Require zero velocity at the end of the horizon.
    pub terminal_stop: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            soft_penalty: 1e4,
            terminal_stop: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcParams {
    pub horizon: usize,
    pub h: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub theta_u: [[f64; 2]; 2],
    pub theta_v: [[f64; 2]; 2],
    pub q: f64,
    pub q_terminal: f64,
    pub r: f64,
    /// Obstacles considered per step.
    pub n_near: usize,
    pub near_radius: f64,
    /// Added to the agent radius in every collision constraint.
    pub safety_margin: f64,
    pub solver: SolverOptions,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            horizon: 12,
            h: 0.2,
            u_max: 2.0,
            v_max: 1.0,
            theta_u: IDENTITY,
            theta_v: IDENTITY,
            q: 1.0,
            q_terminal: 10.0,
            r: 0.1,
            n_near: 6,
            near_radius: 2.0,
            safety_margin: 0.02,
            solver: SolverOptions::default(),
        }
    }
}

const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

impl MpcParams {
    pub fn dynamics(&self) -> DynamicsParams {
        DynamicsParams {
            h: self.h,
            k: self.horizon,
            u_max: self.u_max,
            v_max: self.v_max,
            theta_u: self.theta_u,
            theta_v: self.theta_v,
        }
    }

    pub fn weights(&self) -> MpcWeights {
        MpcWeights::uniform(self.horizon, self.q, self.q_terminal, self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub p: Vec2,
    pub v: Vec2,
    pub t: f64,
}

impl AgentState {
    pub fn at_rest(p: Vec2, t: f64) -> Self {
        Self { p, v: Vec2::ZERO, t }
    }
}

/// Double-integrator step.
pub fn propagate(x: &AgentState, u: Vec2, h: f64) -> AgentState {
    AgentState {
        p: x.p + x.v * h + u * (0.5 * h * h),
        v: x.v + u * h,
        t: x.t + h,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSource {
    Agent(usize),
    Obstacle(usize),
}

/// Linear constraint `a . p_step >= b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub a: Vec2,
    pub b: f64,
    /// Horizon step `1..=K` the constraint applies to.
    pub step: usize,
    pub source: ConstraintSource,
}

impl Hyperplane {
    pub fn slack(&self, p: Vec2) -> f64 {
        self.a.dot(p) - self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Hyperplanes had to be softened.
    Soft,
    /// Solver failed; braking inputs were used.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub prim_res: f64,
    pub dual_res: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent: usize,
    pub start: AgentState,
    /// `x_1..x_K`.
    pub states: Vec<AgentState>,
    /// `u_0..u_{K-1}`.
    pub inputs: Vec<Vec2>,
    pub h: f64,
    pub version: u64,
    pub info: SolveInfo,
}

impl Trajectory {
    /// Chains `propagate` from `start`.
    pub fn rollout(agent: usize, start: AgentState, inputs: Vec<Vec2>, h: f64, info: SolveInfo) -> Self {
        let mut states = Vec::with_capacity(inputs.len());
        let mut x = start;
        for &u in &inputs {
            x = propagate(&x, u, h);
            states.push(x);
        }
        Self {
            agent,
            start,
            states,
            inputs,
            h,
            version: 0,
            info,
        }
    }

    /// Stationary plan holding `start` over `k` steps.
    pub fn hold(agent: usize, start: AgentState, k: usize, h: f64) -> Self {
        let rest = AgentState { v: Vec2::ZERO, ..start };
        let info = SolveInfo {
            status: SolveStatus::Optimal,
            iterations: 0,
            objective: 0.0,
            prim_res: 0.0,
            dual_res: 0.0,
        };
        Self::rollout(agent, rest, vec![Vec2::ZERO; k], h, info)
    }

    pub fn t0(&self) -> f64 {
        self.start.t
    }

    /// Position at time `t`, linear between samples and held outside them.
    pub fn position_at(&self, t: f64) -> Vec2 {
        if t <= self.start.t || self.states.is_empty() {
            return self.start.p;
        }
        let s = (t - self.start.t) / self.h;
        let k = s.floor() as usize;
        if k >= self.states.len() {
            return self.states.last().map_or(self.start.p, |x| x.p);
        }
        let a = if k == 0 { self.start } else { self.states[k - 1] };
        let b = self.states[k];
        a.p.lerp(b.p, s - k as f64)
    }

    /// Exact position inside the control interval starting at step `k`.
    pub fn position_within(&self, k: usize, tau: f64) -> Vec2 {
        let x = if k == 0 { self.start } else { self.states[k - 1] };
        let u = self.inputs[k];
        x.p + x.v * tau + u * (0.5 * tau * tau)
    }

    /// The previous plan re-based at `now`: step k holds the old position at
    /// `now.t + k h`.
    pub fn prediction(&self, now: &AgentState, k: usize) -> Trajectory {
        let mut out = Trajectory::hold(self.agent, *now, k, self.h);
        for (step, x) in out.states.iter_mut().enumerate() {
            x.p = self.position_at(now.t + (step + 1) as f64 * self.h);
        }
        out.start = *now;
        out
    }
}

/// Buffered Voronoi halfplanes of `self_plan` against every other
/// trajectory, one per step and neighbour, with buffer `r`.
pub fn bvc_hyperplanes(self_plan: &Trajectory, others: &[Trajectory], r: f64) -> Vec<Hyperplane> {
    let mut out = Vec::new();
    for other in others.iter().filter(|o| o.agent != self_plan.agent) {
        let now_rel = self_plan.start.p - other.position_at(self_plan.t0());
        for (k, x) in self_plan.states.iter().enumerate() {
            let pj = other.position_at(x.t);
            let a =
                (x.p - pj)
                    .normalized()
                    .or_else(|| now_rel.normalized())
                    .unwrap_or(if self_plan.agent < other.agent {
                        Vec2::new(-1.0, 0.0)
                    } else {
                        Vec2::new(1.0, 0.0)
                    });
            let mid = (x.p + pj) * 0.5;
            out.push(Hyperplane {
                a,
                b: a.dot(mid) + r,
                step: k + 1,
                source: ConstraintSource::Agent(other.agent),
            });
        }
    }
    out
}

/// Separating halfplanes between each planned position and its `n_near`
/// nearest obstacles within `radius`. The flag reports whether any planned
/// position was inside an obstacle.
pub fn corridor_hyperplanes(
    self_plan: &Trajectory,
    obstacles: &[ConvexObstacle],
    n_near: usize,
    radius: f64,
) -> (Vec<Hyperplane>, bool) {
    let mut out = Vec::new();
    let mut recovery = false;
    for (k, x) in self_plan.states.iter().enumerate() {
        let mut near: Vec<(f64, usize, Vec2)> = obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let q = geometry::nearest_boundary_point(&o.vertices, x.p);
                let inside = geometry::contains(&o.vertices, x.p, 0.0);
                (if inside { -q.dist(x.p) } else { q.dist(x.p) }, i, q)
            })
            .filter(|(d, _, _)| *d <= radius)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, i, q) in near.iter().take(n_near) {
            let toward = if d < 0.0 {
                recovery = true;
                q - x.p
            } else {
                x.p - q
            };
            let a = match toward.normalized() {
                Some(a) => a,
                None => {
                    // on the boundary: use the outward normal of the centroid direction
                    (x.p - geometry::centroid(&obstacles[i].vertices))
                        .normalized()
                        .unwrap_or(Vec2::new(1.0, 0.0))
                }
            };
            out.push(Hyperplane {
                a,
                b: a.dot(q),
                step: k + 1,
                source: ConstraintSource::Obstacle(i),
            });
        }
    }
    (out, recovery)
}

/// Path positions at `t_now + h, ..., t_now + K h`.
pub fn tractive_points(path: &ReferencePath, t_now: f64, k: usize, h: f64) -> Vec<Vec2> {
    (1..=k).map(|s| path.position_at(t_now + s as f64 * h)).collect()
}

/// Affine maps from the stacked inputs to positions and velocities.
struct Condensed {
    h: f64,
    /// `p_k = c_k + sum_{j<k} alpha(k, j) u_j`
    c: Vec<Vec2>,
}

impl Condensed {
    fn new(x0: &AgentState, k: usize, h: f64) -> Self {
        let c = (1..=k).map(|s| x0.p + x0.v * (s as f64 * h)).collect();
        Self { h, c }
    }

    /// Coefficient of `u_j` in `p_step` (steps are 1-based).
    fn alpha(&self, step: usize, j: usize) -> f64 {
        if j < step {
            self.h * self.h * (step as f64 - j as f64 - 0.5)
        } else {
            0.0
        }
    }
}

fn cone_normals() -> Vec<Vec2> {
    (0..CONE_FACETS)
        .map(|m| Vec2::from_angle(2.0 * PI * m as f64 / CONE_FACETS as f64))
        .collect()
}

fn mat_t_vec(m: &[[f64; 2]; 2], n: Vec2) -> Vec2 {
    // n^T M as a row vector
    Vec2::new(n.x * m[0][0] + n.y * m[1][0], n.x * m[0][1] + n.y * m[1][1])
}

struct Rows {
    a: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    n: usize,
}

impl Rows {
    fn push(&mut self, mut row: Vec<f64>, mut lo: f64, mut hi: f64) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            return;
        }
        for x in &mut row {
            *x /= norm;
        }
        lo /= norm;
        hi /= norm;
        self.a.extend(row);
        self.l.push(lo);
        self.u.push(hi);
    }

    fn len(&self) -> usize {
        self.l.len()
    }
}

fn build_problem(
    x0: &AgentState,
    planes: &[Hyperplane],
    tractive: &[Vec2],
    dynp: &DynamicsParams,
    w: &MpcWeights,
    opts: &SolverOptions,
    soft: bool,
) -> (QpProblem, f64) {
    let k = dynp.k;
    let active: Vec<&Hyperplane> = planes.iter().filter(|hp| hp.step >= 1 && hp.step <= k).collect();
    // softened problems share one nonnegative slack among the rows of the
    // same step and kind (inter-agent or obstacle)
    let group = |hp: &Hyperplane| 2 * (hp.step - 1) + usize::from(matches!(hp.source, ConstraintSource::Obstacle(_)));
    let mut slack_of = vec![usize::MAX; 2 * k];
    let mut slacks = 0;
    if soft {
        for hp in &active {
            let g = group(hp);
            if slack_of[g] == usize::MAX {
                slack_of[g] = slacks;
                slacks += 1;
            }
        }
    }
    let n = 2 * k + slacks;
    let cd = Condensed::new(x0, k, dynp.h);
    let mut p = DMatrix::zeros(n, n);
    let mut q = DVector::zeros(n);
    let mut constant = 0.0;
    for step in 1..=k {
        let qk = w.q[step - 1];
        if qk == 0.0 {
            continue;
        }
        let err = cd.c[step - 1] - tractive[step - 1];
        constant += 0.5 * qk * err.norm_sq();
        for j in 0..step {
            let aj = cd.alpha(step, j);
            q[2 * j] += qk * aj * err.x;
            q[2 * j + 1] += qk * aj * err.y;
            for l in 0..step {
                let v = qk * aj * cd.alpha(step, l);
                p[(2 * j, 2 * l)] += v;
                p[(2 * j + 1, 2 * l + 1)] += v;
            }
        }
    }
    for j in 0..k {
        p[(2 * j, 2 * j)] += w.r[j];
        p[(2 * j + 1, 2 * j + 1)] += w.r[j];
    }
    for s in 0..slacks {
        p[(2 * k + s, 2 * k + s)] = 2.0 * opts.soft_penalty;
    }

    let mut rows = Rows {
        a: Vec::new(),
        l: Vec::new(),
        u: Vec::new(),
        n,
    };
    let apothem = (PI / CONE_FACETS as f64).cos();
    let normals = cone_normals();
    for j in 0..k {
        for &nm in &normals {
            let c = mat_t_vec(&dynp.theta_u, nm);
            let mut row = vec![0.0; n];
            row[2 * j] = c.x;
            row[2 * j + 1] = c.y;
            rows.push(row, f64::NEG_INFINITY, dynp.u_max * apothem);
        }
    }
    for step in 1..=k {
        for &nm in &normals {
            let c = mat_t_vec(&dynp.theta_v, nm);
            let mut row = vec![0.0; n];
            for j in 0..step {
                row[2 * j] = c.x * dynp.h;
                row[2 * j + 1] = c.y * dynp.h;
            }
            rows.push(row, f64::NEG_INFINITY, dynp.v_max * apothem - c.dot(x0.v));
        }
    }
    for hp in &active {
        let mut row = vec![0.0; n];
        for j in 0..hp.step {
            let aj = cd.alpha(hp.step, j);
            row[2 * j] = hp.a.x * aj;
            row[2 * j + 1] = hp.a.y * aj;
        }
        if soft {
            row[2 * k + slack_of[group(hp)]] = 1.0;
        }
        rows.push(row, hp.b - hp.a.dot(cd.c[hp.step - 1]), f64::INFINITY);
    }
    for s in 0..slacks {
        let mut row = vec![0.0; n];
        row[2 * k + s] = 1.0;
        rows.push(row, 0.0, f64::INFINITY);
    }
    if opts.terminal_stop {
        for d in 0..2 {
            let mut row = vec![0.0; n];
            for j in 0..k {
                row[2 * j + d] = dynp.h;
            }
            let target = if d == 0 { -x0.v.x } else { -x0.v.y };
            rows.push(row, target, target);
        }
    }
    let m = rows.len();
    let prob = QpProblem {
        p,
        q,
        a: DMatrix::from_row_slice(m, rows.n, &rows.a),
        l: DVector::from_vec(rows.l),
        u: DVector::from_vec(rows.u),
    };
    (prob, constant)
}

/// Inputs that bring the agent to rest as fast as the input bound allows.
pub fn braking_inputs(x0: &AgentState, dynp: &DynamicsParams) -> Vec<Vec2> {
    let limit = dynp.u_max * (PI / CONE_FACETS as f64).cos();
    let mut x = *x0;
    let mut out = Vec::with_capacity(dynp.k);
    for _ in 0..dynp.k {
        let mut u = -x.v / dynp.h;
        let norm = u.norm();
        if norm > limit {
            u = u * (limit / norm);
        }
        x = propagate(&x, u, dynp.h);
        out.push(u);
    }
    out
}

/// Stateful per-agent solver that warm-starts from its previous solution.
#[derive(Debug, Clone)]
pub struct MpcSolver {
    pub dynamics: DynamicsParams,
    pub weights: MpcWeights,
    pub options: SolverOptions,
    warm: Option<DVector<f64>>,
    /// The previous solve needed softening.
    soft_first: bool,
}

impl MpcSolver {
    pub fn new(dynamics: DynamicsParams, weights: MpcWeights, options: SolverOptions) -> Self {
        Self {
            dynamics,
            weights,
            options,
            warm: None,
            soft_first: false,
        }
    }

    pub fn from_params(p: &MpcParams) -> Self {
        Self::new(p.dynamics(), p.weights(), p.solver.clone())
    }

    pub fn solve(&mut self, agent: usize, x0: &AgentState, planes: &[Hyperplane], tractive: &[Vec2]) -> Trajectory {
        let dynp = &self.dynamics;
        let settings = QpSettings {
            max_iter: self.options.max_iter,
            eps_abs: self.options.eps_abs,
            eps_rel: self.options.eps_rel,
            ..QpSettings::default()
        };
        let warm = self.warm.take();
        let mut total_iters = 0;
        let has_planes = planes.iter().any(|p| p.step >= 1 && p.step <= dynp.k);
        // after a softened solve the next one usually needs softening too
        let order = if self.soft_first && has_planes {
            [true, false]
        } else {
            [false, true]
        };
        for soft in order {
            if soft && !has_planes {
                continue;
            }
            let (prob, constant) = build_problem(x0, planes, tractive, dynp, &self.weights, &self.options, soft);
            let seed = warm.as_ref().map(|w| {
                let mut x = DVector::zeros(prob.n());
                x.rows_mut(0, w.len()).copy_from(w);
                x
            });
            let sol = qp::solve(&prob, &settings, seed.as_ref().map(|w| (w, None)));
            total_iters += sol.iterations;
            if sol.status != QpStatus::Solved {
                continue;
            }
            let inputs: Vec<Vec2> = (0..dynp.k).map(|j| Vec2::new(sol.x[2 * j], sol.x[2 * j + 1])).collect();
            // zero slacks mean the hard problem was feasible and this is its optimum
            let relaxed = soft
                && sol
                    .x
                    .rows(2 * dynp.k, prob.n() - 2 * dynp.k)
                    .iter()
                    .any(|&v| v > SLACK_TOL);
            self.soft_first = relaxed;
            let info = SolveInfo {
                status: if relaxed {
                    SolveStatus::Soft
                } else {
                    SolveStatus::Optimal
                },
                iterations: total_iters,
                objective: prob.objective(&sol.x) + constant,
                prim_res: sol.prim_res,
                dual_res: sol.dual_res,
            };
            let mut shifted = DVector::zeros(2 * dynp.k);
            for i in 0..2 * dynp.k {
                shifted[i] = sol.x[(i + 2).min(2 * dynp.k - 2 + i % 2)];
            }
            self.warm = Some(shifted);
            return Trajectory::rollout(agent, *x0, inputs, dynp.h, info);
        }
        self.soft_first = false;
        let info = SolveInfo {
            status: SolveStatus::Fallback,
            iterations: total_iters,
            objective: f64::NAN,
            prim_res: f64::NAN,
            dual_res: f64::NAN,
        };
        Trajectory::rollout(agent, *x0, braking_inputs(x0, dynp), dynp.h, info)
    }
}

/// One-shot solve with default solver options.
pub fn solve_mpc(
    x0: &AgentState,
    planes: &[Hyperplane],
    tractive: &[Vec2],
    dynp: &DynamicsParams,
    w: &MpcWeights,
) -> Trajectory {
    MpcSolver::new(dynp.clone(), w.clone(), SolverOptions::default()).solve(0, x0, planes, tractive)
}

/// The QP `solve_mpc` would hand to the backend, exposed for checking
/// solutions against an independent solver. Returns the problem and the
/// constant dropped from its objective.
pub fn mpc_problem(
    x0: &AgentState,
    planes: &[Hyperplane],
    tractive: &[Vec2],
    dynp: &DynamicsParams,
    w: &MpcWeights,
    opts: &SolverOptions,
) -> (QpProblem, f64) {
    build_problem(x0, planes, tractive, dynp, w, opts, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dynp() -> DynamicsParams {
        MpcParams::default().dynamics()
    }

    #[test]
    fn propagate_matches_hand_arithmetic() {
        let x = AgentState {
            p: Vec2::ZERO,
            v: Vec2::new(1.0, 0.0),
            t: 0.0,
        };
        let y = propagate(&x, Vec2::new(1.0, 0.0), 0.2);
        assert!((y.p - Vec2::new(0.22, 0.0)).norm() < 1e-15);
        assert!((y.v - Vec2::new(1.2, 0.0)).norm() < 1e-15);
        let rest = AgentState::at_rest(Vec2::new(3.0, 4.0), 1.0);
        assert_eq!(propagate(&rest, Vec2::ZERO, 0.2).p, rest.p);
    }

    #[test]
    fn bvc_two_agents() {
        let a = Trajectory::hold(1, AgentState::at_rest(Vec2::ZERO, 0.0), 3, 0.2);
        let b = Trajectory::hold(2, AgentState::at_rest(Vec2::new(2.0, 0.0), 0.0), 3, 0.2);
        let ha = bvc_hyperplanes(&a, std::slice::from_ref(&b), 0.2);
        let hb = bvc_hyperplanes(&b, std::slice::from_ref(&a), 0.2);
        assert_eq!(ha.len(), 3);
        assert_eq!(ha[0].a, Vec2::new(-1.0, 0.0));
        assert!((ha[0].b + 0.8).abs() < 1e-12);
        assert!((hb[0].b - 1.2).abs() < 1e-12);
        assert!(bvc_hyperplanes(&a, &[], 0.2).is_empty());
    }

    #[test]
    fn bvc_coincident_tie_break_is_mirrored() {
        let a = Trajectory::hold(1, AgentState::at_rest(Vec2::ZERO, 0.0), 1, 0.2);
        let b = Trajectory::hold(2, AgentState::at_rest(Vec2::ZERO, 0.0), 1, 0.2);
        let ha = bvc_hyperplanes(&a, std::slice::from_ref(&b), 0.2);
        let hb = bvc_hyperplanes(&b, std::slice::from_ref(&a), 0.2);
        assert_eq!(ha[0].a, -hb[0].a);
    }

    #[test]
    fn corridor_faces_and_corners() {
        let sq = ConvexObstacle::rect(Vec2::ZERO, Vec2::new(1.0, 1.0));
        let at = |p| Trajectory::hold(1, AgentState::at_rest(p, 0.0), 1, 0.2);
        let (hs, rec) = corridor_hyperplanes(&at(Vec2::new(2.0, 0.5)), std::slice::from_ref(&sq), 6, 2.0);
        assert!(!rec);
        assert_eq!(hs[0].a, Vec2::new(1.0, 0.0));
        assert!((hs[0].b - 1.0).abs() < 1e-12);
        let (far, _) = corridor_hyperplanes(&at(Vec2::new(9.0, 9.0)), std::slice::from_ref(&sq), 6, 2.0);
        assert!(far.is_empty());
        let (corner, _) = corridor_hyperplanes(&at(Vec2::new(2.0, 2.0)), std::slice::from_ref(&sq), 6, 2.0);
        let d = Vec2::new(1.0, 1.0) / 2f64.sqrt();
        assert!((corner[0].a - d).norm() < 1e-12);
        let (inside, rec) = corridor_hyperplanes(&at(Vec2::new(0.9, 0.5)), std::slice::from_ref(&sq), 6, 2.0);
        assert!(rec);
        assert_eq!(inside[0].a, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn tractive_points_clamp() {
        let path = ReferencePath::from_points(1, &[Vec2::ZERO, Vec2::new(1.0, 0.0)], 0.0, 0.5);
        let pts = tractive_points(&path, 0.0, 12, 0.2);
        for (k, p) in pts.iter().enumerate().take(10) {
            assert!((p.x - 0.1 * (k + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(pts[10], Vec2::new(1.0, 0.0));
        assert_eq!(pts[11], Vec2::new(1.0, 0.0));
        assert!(tractive_points(&path, 50.0, 3, 0.2)
            .iter()
            .all(|p| *p == Vec2::new(1.0, 0.0)));
        assert_eq!(tractive_points(&path, 0.0, 1, 0.2).len(), 1);
    }

    #[test]
    fn at_rest_on_target_stays() {
        let x0 = AgentState::at_rest(Vec2::new(1.0, 1.0), 0.0);
        let d = dynp();
        let traj = solve_mpc(&x0, &[], &vec![x0.p; d.k], &d, &MpcParams::default().weights());
        assert_eq!(traj.info.status, SolveStatus::Optimal);
        assert!(traj.inputs.iter().all(|u| u.norm() < 1e-6));
        assert!(traj.info.objective.abs() < 1e-9);
    }

    #[test]
    fn halfplane_is_respected() {
        let x0 = AgentState::at_rest(Vec2::ZERO, 0.0);
        let d = dynp();
        let w = MpcParams::default().weights();
        let line: Vec<Vec2> = (1..=d.k).map(|k| Vec2::new(0.1 * k as f64, 0.0)).collect();
        let free = solve_mpc(&x0, &[], &line, &d, &w);
        let planes: Vec<Hyperplane> = (1..=d.k)
            .map(|step| Hyperplane {
                a: Vec2::new(-1.0, 0.0),
                b: -0.5,
                step,
                source: ConstraintSource::Agent(2),
            })
            .collect();
        let cut = solve_mpc(&x0, &planes, &line, &d, &w);
        assert_eq!(cut.info.status, SolveStatus::Optimal);
        for x in &cut.states {
            assert!(x.p.x <= 0.5 + 1e-6);
            assert!(x.v.norm() <= d.v_max + 1e-6);
        }
        assert!(cut.info.objective >= free.info.objective - 1e-9);

        let opts = SolverOptions {
            terminal_stop: true,
            ..SolverOptions::default()
        };
        let stop = MpcSolver::new(d.clone(), w.clone(), opts).solve(1, &x0, &planes, &line);
        assert!(stop.states.last().unwrap().v.norm() < 1e-6);
    }

    #[test]
    fn conflicting_planes_are_softened() {
        let x0 = AgentState::at_rest(Vec2::ZERO, 0.0);
        let d = dynp();
        let w = MpcParams::default().weights();
        let planes = vec![
            Hyperplane {
                a: Vec2::new(1.0, 0.0),
                b: 0.3,
                step: 1,
                source: ConstraintSource::Agent(2),
            },
            Hyperplane {
                a: Vec2::new(-1.0, 0.0),
                b: 0.3,
                step: 1,
                source: ConstraintSource::Agent(3),
            },
        ];
        let traj = solve_mpc(&x0, &planes, &vec![Vec2::ZERO; d.k], &d, &w);
        assert_eq!(traj.info.status, SolveStatus::Soft);
    }

    #[test]
    fn braking_stops() {
        let d = dynp();
        let x0 = AgentState {
            p: Vec2::ZERO,
            v: Vec2::new(0.9, 0.3),
            t: 0.0,
        };
        let t = Trajectory::rollout(
            1,
            x0,
            braking_inputs(&x0, &d),
            d.h,
            Trajectory::hold(1, x0, 1, d.h).info,
        );
        assert!(t.states.last().unwrap().v.norm() < 1e-12);
        assert!(t.inputs.iter().all(|u| u.norm() <= d.u_max));
    }
}
