mod common;

use common::passage_oracle::{gap, random_pair, sampled_shortest, swept_ends};
use homoplan::geometry::{Segment, Vec2};
use homoplan::passage::{detect_complete_passage, PassageDetectionParams};

fn close(a: &Segment, b: &Segment, tol: f64) -> bool {
    a.a.dist(b.a) <= tol && a.b.dist(b.b) <= tol
}

#[test]
fn passages_match_sampling_and_sweep_oracles() {
    let params = PassageDetectionParams::default();
    for seed in 0..50 {
        let (a, b) = random_pair(seed);
        let obstacles = [a.clone(), b.clone()];
        let p = detect_complete_passage(0, 1, &obstacles, &params).expect("gap is below l_max");
        let oracle = sampled_shortest(&a.vertices, &b.vertices, 1e-3);
        assert!(
            (p.width - oracle.length()).abs() <= 1e-4,
            "seed {seed}: {} vs {}",
            p.width,
            oracle.length()
        );
        assert!(close(&p.narrowest, &oracle, params.kappa), "seed {seed}: narrowest");

        // the sweep fixes where the passage ends along the axis to within
        // one step; the segment there is the free gap on that line
        let (entrance, exit) = swept_ends(&a.vertices, &b.vertices, oracle, params.l_max, params.kappa / 10.0);
        let u = (oracle.b - oracle.a) / oracle.length();
        let axis = Vec2::new(u.y, -u.x);
        let depth = |s: &Segment| (s.a - oracle.a).dot(axis);
        for (ours, want) in [(&p.entrance, &entrance), (&p.exit, &exit)] {
            assert!(
                (depth(ours) - depth(want)).abs() <= params.kappa,
                "seed {seed}: {ours:?} vs {want:?}"
            );
            if ours == &p.narrowest {
                continue;
            }
            let on_line = gap(&a.vertices, &b.vertices, ours.a, u).expect("line cuts both obstacles");
            assert!(close(ours, &on_line, 1e-6), "seed {seed}: {ours:?} vs {on_line:?}");
        }
    }
}

#[test]
fn wide_gaps_are_not_passages() {
    let (a, b) = random_pair(7);
    let tight = PassageDetectionParams {
        l_max: 0.04,
        ..PassageDetectionParams::default()
    };
    assert!(detect_complete_passage(0, 1, &[a, b], &tight).is_none());
}
