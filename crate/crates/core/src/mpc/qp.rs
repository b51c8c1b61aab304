//! Dense operator-splitting QP solver.
//!
//! Solves
//!
//! ```text
//! minimize   1/2 x'Px + q'x   subject to   l <= Ax <= u
//! ```
//!
//! with the ADMM scheme: over-relaxation, adaptive step size, a primal
//! infeasibility certificate and a final active-set polish.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSettings {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_pinf: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adapt_interval: usize,
    pub check_interval: usize,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_pinf: 1e-3,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adapt_interval: 25,
            check_interval: 5,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    PrimalInfeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    pub prim_res: f64,
    pub dual_res: f64,
}

const RHO_EQ_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
/// Residual level, relative to the problem scale, below which a polish is
/// attempted during the iterations.
const POLISH_GATE: f64 = 1e-2;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    /// Largest constraint violation at `x`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        let mut worst = 0.0f64;
        for i in 0..self.m() {
            worst = worst.max(self.l[i] - ax[i]).max(ax[i] - self.u[i]);
        }
        worst
    }
}

struct Kkt {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Kkt {
    fn new(prob: &QpProblem, rho: &DVector<f64>, sigma: f64) -> Option<Self> {
        let n = prob.n();
        let mut m = prob.p.clone();
        for i in 0..n {
            m[(i, i)] += sigma;
        }
        let scaled = DMatrix::from_fn(prob.m(), n, |r, c| prob.a[(r, c)] * rho[r]);
        m += prob.a.transpose() * scaled;
        nalgebra::Cholesky::new(m).map(|chol| Kkt { chol })
    }
}

fn rho_vector(prob: &QpProblem, rho: f64) -> DVector<f64> {
    DVector::from_fn(prob.m(), |i, _| {
        if (prob.u[i] - prob.l[i]).abs() < 1e-12 {
            rho * RHO_EQ_SCALE
        } else {
            rho
        }
    })
}

fn project(prob: &QpProblem, i: usize, v: f64) -> f64 {
    v.clamp(prob.l[i], prob.u[i])
}

/// Diagonal scaling `P' = c D P D`, `A' = E A D`, `q' = c D q`,
/// `l' = E l`, `u' = E u`.
struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

const RUIZ_PASSES: usize = 10;

fn col_inf(m: &DMatrix<f64>, c: usize) -> f64 {
    m.column(c).iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn row_inf(m: &DMatrix<f64>, r: usize) -> f64 {
    m.row(r).iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn safe_inv_sqrt(v: f64) -> f64 {
    if v < 1e-4 {
        1.0
    } else {
        1.0 / v.min(1e4).sqrt()
    }
}

/// Modified Ruiz equilibration of the KKT matrix followed by cost scaling.
fn equilibrate(prob: &QpProblem) -> (QpProblem, Scaling) {
    let (n, m) = (prob.n(), prob.m());
    let mut sp = prob.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let mut c = 1.0;
    for _ in 0..RUIZ_PASSES {
        let dd = DVector::from_fn(n, |j, _| safe_inv_sqrt(col_inf(&sp.p, j).max(col_inf(&sp.a, j))));
        let de = DVector::from_fn(m, |i, _| safe_inv_sqrt(row_inf(&sp.a, i)));
        for j in 0..n {
            sp.p.column_mut(j).scale_mut(dd[j]);
            sp.a.column_mut(j).scale_mut(dd[j]);
            sp.q[j] *= dd[j];
        }
        for i in 0..n {
            sp.p.row_mut(i).scale_mut(dd[i]);
        }
        for i in 0..m {
            sp.a.row_mut(i).scale_mut(de[i]);
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&de);
        let mean_col = (0..n).map(|j| col_inf(&sp.p, j)).sum::<f64>() / n.max(1) as f64;
        let gamma = safe_inv_sqrt(mean_col.max(inf_norm(&sp.q))).powi(2);
        sp.p *= gamma;
        sp.q *= gamma;
        c *= gamma;
    }
    for i in 0..m {
        sp.l[i] *= e[i];
        sp.u[i] *= e[i];
    }
    (sp, Scaling { d, e, c })
}

/// Runs the solver. `warm` seeds the primal iterate (and the dual one when
/// its length matches).
pub fn solve(
    prob: &QpProblem,
    settings: &QpSettings,
    warm: Option<(&DVector<f64>, Option<&DVector<f64>>)>,
) -> QpSolution {
    let (n, m) = (prob.n(), prob.m());
    let (sp, sc) = equilibrate(prob);
    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(m);
    if let Some((wx, wy)) = warm {
        if wx.len() == n {
            x = wx.component_div(&sc.d);
        }
        if let Some(wy) = wy.filter(|wy| wy.len() == m) {
            y = wy.component_div(&sc.e) * sc.c;
        }
    }
    let mut z = &sp.a * &x;
    for i in 0..m {
        z[i] = project(&sp, i, z[i]);
    }
    let unscale = |x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>| {
        (
            x.component_mul(&sc.d),
            y.component_mul(&sc.e) / sc.c,
            z.component_div(&sc.e),
        )
    };

    let mut rho_scalar = settings.rho;
    let mut last_active: Option<Vec<(usize, bool)>> = None;
    let mut rho = rho_vector(&sp, rho_scalar);
    let mut kkt = match Kkt::new(&sp, &rho, settings.sigma) {
        Some(k) => k,
        None => {
            return QpSolution {
                x: x.component_mul(&sc.d),
                y,
                status: QpStatus::MaxIterations,
                iterations: 0,
                polished: false,
                prim_res: f64::INFINITY,
                dual_res: f64::INFINITY,
            }
        }
    };

    let at = prob.a.transpose();
    let mut status = QpStatus::MaxIterations;
    let mut iterations = settings.max_iter;
    let (mut prim_res, mut dual_res) = (f64::INFINITY, f64::INFINITY);
    let alpha = settings.alpha;
    let mut y_prev = y.clone();
    let mut rhs_c = DVector::zeros(m);
    let mut rhs = DVector::zeros(n);
    let mut z_tilde = DVector::zeros(m);

    for it in 1..=settings.max_iter {
        let check = it % settings.check_interval == 0 || it == settings.max_iter;
        let adapt = it % settings.adapt_interval == 0;
        if check {
            y_prev.copy_from(&y);
        }
        for i in 0..m {
            rhs_c[i] = rho[i] * z[i] - y[i];
        }
        rhs.copy_from(&sp.q);
        rhs.gemv_tr(1.0, &sp.a, &rhs_c, -1.0);
        rhs.axpy(settings.sigma, &x, 1.0);
        kkt.chol.solve_mut(&mut rhs);
        z_tilde.gemv(1.0, &sp.a, &rhs, 0.0);
        x.axpy(alpha, &rhs, 1.0 - alpha);
        for i in 0..m {
            let relaxed = alpha * z_tilde[i] + (1.0 - alpha) * z[i];
            let z_new = project(&sp, i, relaxed + y[i] / rho[i]);
            y[i] += rho[i] * (relaxed - z_new);
            z[i] = z_new;
        }

        if !(check || adapt) {
            continue;
        }
        let (ux, uy, uz) = unscale(&x, &y, &z);
        let ax = &prob.a * &ux;
        let px = &prob.p * &ux;
        let aty = &at * &uy;
        prim_res = inf_norm(&(&ax - &uz));
        dual_res = inf_norm(&(&px + &prob.q + &aty));
        let prim_scale = inf_norm(&ax).max(inf_norm(&uz));
        let dual_scale = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&prob.q));
        if prim_res <= settings.eps_abs + settings.eps_rel * prim_scale
            && dual_res <= settings.eps_abs + settings.eps_rel * dual_scale
        {
            status = QpStatus::Solved;
            iterations = it;
            break;
        }
        if check {
            let dy = (&y - &y_prev).component_mul(&sc.e);
            if infeasibility_certificate(prob, &at, &dy, settings.eps_pinf) {
                status = QpStatus::PrimalInfeasible;
                iterations = it;
                break;
            }
        }
        if adapt
            && settings.polish
            && prim_res <= POLISH_GATE * prim_scale.max(1.0)
            && dual_res <= POLISH_GATE * dual_scale.max(1.0)
        {
            let active = active_set(&sp, &z, &y);
            if last_active.as_ref() != Some(&active) {
                if let Some((px, py, pr, dr)) = polish(prob, &active) {
                    if pr <= settings.eps_abs && dr <= settings.eps_abs {
                        return QpSolution {
                            x: px,
                            y: py,
                            status: QpStatus::Solved,
                            iterations: it,
                            polished: true,
                            prim_res: pr,
                            dual_res: dr,
                        };
                    }
                }
                last_active = Some(active);
            }
        }
        if adapt {
            let num = prim_res / prim_scale.max(1e-12);
            let den = dual_res / dual_scale.max(1e-12);
            let new_rho = (rho_scalar * (num / den.max(1e-12)).sqrt()).clamp(RHO_MIN, RHO_MAX);
            if new_rho > 5.0 * rho_scalar || new_rho < rho_scalar / 5.0 {
                rho_scalar = new_rho;
                rho = rho_vector(&sp, rho_scalar);
                if let Some(k) = Kkt::new(&sp, &rho, settings.sigma) {
                    kkt = k;
                }
            }
        }
    }

    let active = active_set(&sp, &z, &y);
    let (x, y, _) = unscale(&x, &y, &z);
    let mut sol = QpSolution {
        x,
        y,
        status,
        iterations,
        polished: false,
        prim_res,
        dual_res,
    };
    if settings.polish && status != QpStatus::PrimalInfeasible {
        if let Some((x, y, prim, dual)) = polish(prob, &active) {
            if prim <= sol.prim_res.max(1e-9) && dual <= sol.dual_res.max(1e-9) {
                sol.x = x;
                sol.y = y;
                sol.prim_res = prim;
                sol.dual_res = dual;
                sol.polished = true;
                if sol.status == QpStatus::MaxIterations && prim <= settings.eps_abs && dual <= settings.eps_abs {
                    sol.status = QpStatus::Solved;
                }
            }
        }
    }
    sol
}

fn infeasibility_certificate(prob: &QpProblem, at: &DMatrix<f64>, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = inf_norm(dy);
    if norm < 1e-12 {
        return false;
    }
    if inf_norm(&(at * dy)) > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..prob.m() {
        let d = dy[i];
        if d > 0.0 {
            if prob.u[i].is_infinite() {
                if d > eps * norm {
                    return false;
                }
                continue;
            }
            support += prob.u[i] * d;
        } else if d < 0.0 {
            if prob.l[i].is_infinite() {
                if -d > eps * norm {
                    return false;
                }
                continue;
            }
            support += prob.l[i] * d;
        }
    }
    support < -eps * norm
}

/// Active-set guess from an ADMM iterate: `(row, upper)` pairs.
fn active_set(prob: &QpProblem, z: &DVector<f64>, y: &DVector<f64>) -> Vec<(usize, bool)> {
    let mut active = Vec::new();
    for i in 0..prob.m() {
        if z[i] - prob.l[i] < -y[i] {
            active.push((i, false));
        } else if prob.u[i] - z[i] < y[i] {
            active.push((i, true));
        }
    }
    active
}

const POLISH_ROUNDS: usize = 4;

/// Solves the equality-constrained problem on `active`, starting from the
/// guessed set and repairing it for a few rounds: rows whose multiplier has
/// the wrong sign are released and violated rows are added. Returns
/// `(x, y, prim_res, dual_res)` once the set is consistent.
fn polish(prob: &QpProblem, active: &[(usize, bool)]) -> Option<(DVector<f64>, DVector<f64>, f64, f64)> {
    let m = prob.m();
    let mut set: Vec<(usize, bool)> = active.to_vec();
    for _ in 0..POLISH_ROUNDS {
        let (x, mult) = solve_active(prob, &set)?;
        let wrong: Vec<usize> = set
            .iter()
            .zip(mult.iter())
            .filter(|&(&(i, upper), &yi)| prob.l[i] != prob.u[i] && (if upper { yi < -1e-9 } else { yi > 1e-9 }))
            .map(|(&(i, _), _)| i)
            .collect();
        if !wrong.is_empty() {
            set.retain(|(i, _)| !wrong.contains(i));
            continue;
        }
        let ax = &prob.a * &x;
        let violated: Vec<(usize, bool)> = (0..m)
            .filter(|i| !set.iter().any(|(j, _)| j == i))
            .filter_map(|i| {
                if ax[i] > prob.u[i] + 1e-9 {
                    Some((i, true))
                } else if ax[i] < prob.l[i] - 1e-9 {
                    Some((i, false))
                } else {
                    None
                }
            })
            .collect();
        if !violated.is_empty() {
            set.extend(violated);
            continue;
        }
        let mut y = DVector::zeros(m);
        for (&(i, _), &yi) in set.iter().zip(mult.iter()) {
            y[i] = yi;
        }
        let zp = DVector::from_fn(m, |i, _| ax[i].clamp(prob.l[i], prob.u[i]));
        let prim = inf_norm(&(&ax - &zp));
        let dual = inf_norm(&(&prob.p * &x + &prob.q + prob.a.transpose() * &y));
        return Some((x, y, prim, dual));
    }
    None
}

/// KKT solve with the rows of `set` held at their bounds. Returns `x` and
/// one multiplier per row of `set`.
fn solve_active(prob: &QpProblem, set: &[(usize, bool)]) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = prob.n();
    let k = set.len();
    let delta = 1e-9;
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    for (r, &(i, _)) in set.iter().enumerate() {
        for c in 0..n {
            kkt[(n + r, c)] = prob.a[(i, c)];
            kkt[(c, n + r)] = prob.a[(i, c)];
        }
    }
    let mut reg = kkt.clone();
    for d in 0..n {
        reg[(d, d)] += delta;
    }
    for d in n..n + k {
        reg[(d, d)] -= delta;
    }
    let lu = reg.lu();
    let mut rhs = DVector::zeros(n + k);
    for d in 0..n {
        rhs[d] = -prob.q[d];
    }
    for (r, &(i, upper)) in set.iter().enumerate() {
        rhs[n + r] = if upper { prob.u[i] } else { prob.l[i] };
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let resid = &rhs - &kkt * &sol;
        sol += lu.solve(&resid)?;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).iter().copied().collect()))
}
