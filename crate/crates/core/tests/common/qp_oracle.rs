//! Accelerated projected gradient on the dual of
//! `min 1/2 x'Px + q'x  s.t.  l <= Ax <= u`.

use nalgebra::{DMatrix, DVector};

pub struct DualSolution {
    pub x: DVector<f64>,
    pub primal: f64,
    /// Lower bound on the optimal value.
    pub dual: f64,
    pub violation: f64,
}

pub fn solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    iters: usize,
) -> DualSolution {
    // stack as G x <= g; equality rows appear twice
    let mut rows = Vec::new();
    let mut g = Vec::new();
    for i in 0..a.nrows() {
        if u[i].is_finite() {
            rows.push(a.row(i).into_owned());
            g.push(u[i]);
        }
        if l[i].is_finite() {
            rows.push(-a.row(i).into_owned());
            g.push(-l[i]);
        }
    }
    let gm = DMatrix::from_rows(&rows);
    let gv = DVector::from_vec(g);
    let pinv = p.clone().try_inverse().expect("P is positive definite");
    let hess = &gm * &pinv * gm.transpose();
    let lip = hess.symmetric_eigenvalues().max();
    let step = 1.0 / lip;
    let primal_of = |lam: &DVector<f64>| -(&pinv * (q + gm.transpose() * lam));
    let dual_of = |lam: &DVector<f64>| {
        let x = primal_of(lam);
        0.5 * x.dot(&(p * &x)) + q.dot(&x) + lam.dot(&(&gm * &x - &gv))
    };
    let mut lam = DVector::zeros(gv.len());
    let mut yk = lam.clone();
    let mut tk = 1.0f64;
    for _ in 0..iters {
        let x = primal_of(&yk);
        let grad = &gm * &x - &gv;
        let next = (&yk + grad * step).map(|v| v.max(0.0));
        let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        yk = &next + (&next - &lam) * ((tk - 1.0) / tn);
        lam = next;
        tk = tn;
    }
    let x = primal_of(&lam);
    let violation = (&gm * &x - &gv).iter().fold(0.0f64, |m, v| m.max(*v));
    DualSolution {
        primal: 0.5 * x.dot(&(p * &x)) + q.dot(&x),
        dual: dual_of(&lam),
        x,
        violation,
    }
}
