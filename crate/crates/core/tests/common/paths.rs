//! Exhaustive simple-path enumeration with a from-scratch cost evaluation.

use homoplan::passage::{CompletePassage, PassageId};
use homoplan::planner::PassageTimeMap;
use homoplan::Vec2;

pub struct Weights {
    pub lambda_p: f64,
    pub lambda_h: f64,
    pub alpha: f64,
    pub v: f64,
    pub w0: f64,
    pub t0: f64,
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Parameter along `p0 -> p1` where it meets segment `q0 -> q1`.
fn hit(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<f64> {
    let r = p1 - p0;
    let s = q1 - q0;
    let den = cross(r, s);
    if den.abs() < 1e-15 {
        return None;
    }
    let t = cross(q0 - p0, s) / den;
    let u = cross(q0 - p0, r) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

fn ci(a: (f64, f64), b: (f64, f64), alpha: f64) -> f64 {
    if a.0 < b.1 && b.0 < a.1 {
        1.0
    } else {
        (alpha * (a.0.max(b.0) - a.1.min(b.1)).abs()).exp()
    }
}

/// Cost of walking `pts` in order.
pub fn path_cost(
    pts: &[Vec2],
    passages: &[CompletePassage],
    higher: &[PassageTimeMap],
    w: &Weights,
) -> (f64, Vec<PassageId>) {
    let mut len = 0.0;
    let mut fp = w.w0;
    let mut fh = 0.0;
    let mut crossed = Vec::new();
    for k in 1..pts.len() {
        let (a, b) = (pts[k - 1], pts[k]);
        let seg_len = (b - a).norm();
        for p in passages {
            let Some(t) = hit(a, b, p.narrowest.a, p.narrowest.b) else {
                continue;
            };
            if t >= 1.0 {
                continue;
            }
            let u = p.narrowest.b - p.narrowest.a;
            let un = u / u.norm();
            let axis = Vec2::new(un.y, -un.x);
            let forward = (b - a).dot(axis) >= 0.0;
            let ent = (p.entrance.a - p.narrowest.a).dot(axis).max(0.0);
            let ext = (p.narrowest.a - p.exit.a).dot(axis).max(0.0);
            let (before, after) = if forward { (ext, ent) } else { (ent, ext) };
            let s = len + t * seg_len;
            let span = (w.t0 + (s - before) / w.v, w.t0 + (s + after) / w.v);
            fp = f64::min(fp, p.width);
            for m in higher {
                let worst = m
                    .spans(p.id)
                    .iter()
                    .map(|sp| ci(span, (sp.start, sp.end), w.alpha))
                    .fold(0.0, f64::max);
                fh += worst;
            }
            crossed.push(p.id);
        }
        len += seg_len;
    }
    (len - w.lambda_p * fp + w.lambda_h * fh, crossed)
}

/// Minimum cost over all simple paths from `s` to `t`, or `None` when
/// disconnected.
pub fn best_simple_path(
    vertices: &[Vec2],
    edges: &[(usize, usize)],
    s: usize,
    t: usize,
    passages: &[CompletePassage],
    higher: &[PassageTimeMap],
    w: &Weights,
) -> Option<(f64, Vec<usize>)> {
    let n = vertices.len();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut stack = vec![s];
    let mut on = vec![false; n];
    on[s] = true;
    fn dfs(
        x: usize,
        t: usize,
        adj: &[Vec<usize>],
        on: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if x == t {
            visit(stack);
            return;
        }
        for &y in &adj[x] {
            if !on[y] {
                on[y] = true;
                stack.push(y);
                dfs(y, t, adj, on, stack, visit);
                stack.pop();
                on[y] = false;
            }
        }
    }
    let mut visit = |p: &[usize]| {
        let pts: Vec<Vec2> = p.iter().map(|&i| vertices[i]).collect();
        let (c, _) = path_cost(&pts, passages, higher, w);
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, p.to_vec()));
        }
    };
    dfs(s, t, &adj, &mut on, &mut stack, &mut visit);
    best
}
