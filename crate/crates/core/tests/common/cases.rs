//! Seeded random planner instances.

use homoplan::geometry::Segment;
use homoplan::passage::{CompletePassage, PassageId};
use homoplan::planner::{PassageTimeMap, PlannerParams, TimeSpan};
use homoplan::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Passage whose narrowest segment is centred on `at` with direction `dir`.
pub fn passage(id: PassageId, at: Vec2, dir: Vec2, width: f64, depth_in: f64, depth_out: f64) -> CompletePassage {
    let u = dir / dir.norm();
    let axis = Vec2::new(u.y, -u.x);
    let half = u * 0.3;
    let seg = |off: Vec2| Segment::new(at - half + off, at + half + off);
    CompletePassage {
        id,
        entrance: seg(axis * depth_in),
        narrowest: seg(Vec2::ZERO),
        exit: seg(axis * -depth_out),
        width,
    }
}

pub struct Case {
    pub verts: Vec<Vec2>,
    pub edges: Vec<(usize, usize)>,
    pub passages: Vec<CompletePassage>,
    pub higher: Vec<PassageTimeMap>,
    pub t0: f64,
    pub params: PlannerParams,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=12);
    let verts: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.3) {
                edges.push((u, v));
            }
        }
    }
    let np = rng.gen_range(0..=4);
    let passages: Vec<CompletePassage> = (0..np)
        .map(|k| {
            let at = Vec2::new(rng.gen_range(1.0..9.0), rng.gen_range(1.0..9.0));
            let dir = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::PI));
            let id = PassageId::new(2 * k, 2 * k + 1);
            let mut p = passage(
                id,
                at,
                dir,
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.0..0.6),
                rng.gen_range(0.0..0.6),
            );
            let half = rng.gen_range(0.5..3.0);
            let u = dir * half;
            p.narrowest = Segment::new(at - u, at + u);
            p
        })
        .collect();
    let nh = rng.gen_range(0..=2);
    let higher = (0..nh)
        .map(|j| {
            let mut m = PassageTimeMap::new(j + 1);
            for p in &passages {
                if rng.gen_bool(0.6) {
                    let t = rng.gen_range(0.0..40.0);
                    m.entries
                        .entry(p.id)
                        .or_default()
                        .push(TimeSpan::new(t, t + rng.gen_range(0.1..3.0)));
                }
            }
            m
        })
        .collect();
    let params = PlannerParams {
        lambda_p: [0.0, 1.0, 50.0][rng.gen_range(0..3)],
        lambda_h: [1.0, 20.0, 500.0][rng.gen_range(0..3)],
        alpha: -rng.gen_range(0.05..1.0),
        avg_velocity: rng.gen_range(0.3..1.0),
        no_passage_width: None,
    };
    Case {
        verts,
        edges,
        passages,
        higher,
        t0: rng.gen_range(0.0..5.0),
        params,
    }
}
