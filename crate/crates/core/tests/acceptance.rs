//! One pass/fail line per acceptance criterion. Exits nonzero when any fails.

mod common;

use std::time::Instant;

use common::cases::random_case;
use common::mpc_cases::random_instance;
use common::passage_oracle::{gap, random_pair, sampled_shortest, swept_ends};
use common::paths::{best_simple_path, path_cost, Weights};
use homoplan::geometry::{Segment, Vec2};
use homoplan::harness::{aggregate, batch_scenarios, run_batch, thread_count, Arm, BatchConfig, RunRow};
use homoplan::mpc::{mpc_problem, propagate, solve_mpc, MpcParams, SolveStatus, SolverOptions};
use homoplan::passage::{detect_complete_passage, PassageDetectionParams, PassageSet};
use homoplan::planner::{plan_path, span_conflict, PassageTimeMap, PlanContext, TimeSpan};
use homoplan::runtime::{run, PlannerVariant, RunConfig, RunResult};
use homoplan::voronoi::{annotate_crossings, VoronoiGraph};
use homoplan::world::presets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn optimality() -> Outcome {
    let start = Instant::now();
    let l_max = 1.0;
    let (mut compared, mut seed, mut worst) = (0, 0, 0.0f64);
    while compared < 200 {
        seed += 1;
        let case = random_case(seed);
        let n = case.verts.len();
        let set = PassageSet::from_passages(case.passages.clone());
        let g = annotate_crossings(&VoronoiGraph::from_parts(case.verts.clone(), &case.edges), &set);
        let ctx = PlanContext {
            graph: &g,
            obstacles: &[],
            passages: &set,
            l_max,
        };
        let w = Weights {
            lambda_p: case.params.lambda_p,
            lambda_h: case.params.lambda_h,
            alpha: case.params.alpha,
            v: case.params.avg_velocity,
            w0: l_max,
            t0: case.t0,
        };
        let agent = case.higher.len() + 1;
        let oracle = best_simple_path(&case.verts, &case.edges, 0, n - 1, &case.passages, &case.higher, &w);
        let plan = plan_path(
            &ctx,
            agent,
            case.verts[0],
            case.verts[n - 1],
            case.t0,
            &case.higher,
            &case.params,
        );
        match (oracle, plan) {
            (None, Err(_)) => continue,
            (Some((best, _)), Ok(plan)) => {
                let (own, _) = path_cost(&plan.path.points(), &case.passages, &case.higher, &w);
                worst = worst
                    .max((plan.cost.total - best).abs())
                    .max((plan.cost.total - own).abs());
                compared += 1;
            }
            _ => return Err(format!("seed {seed}: planner and enumeration disagree on reachability")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-9, || format!("max cost difference {worst:.3e} > 1e-9"))?;
    ensure(secs <= 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("200 graphs, max cost difference {worst:.1e}, {secs:.2} s"))
}

fn passage_detection() -> Outcome {
    let params = PassageDetectionParams::default();
    let (mut width_err, mut end_err) = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let (a, b) = random_pair(seed);
        let p = detect_complete_passage(0, 1, &[a.clone(), b.clone()], &params)
            .ok_or_else(|| format!("seed {seed}: no passage detected"))?;
        let oracle = sampled_shortest(&a.vertices, &b.vertices, 1e-3);
        width_err = width_err.max((p.width - oracle.length()).abs());
        end_err = end_err
            .max(p.narrowest.a.dist(oracle.a))
            .max(p.narrowest.b.dist(oracle.b));
        let (entrance, exit) = swept_ends(&a.vertices, &b.vertices, oracle, params.l_max, params.kappa / 10.0);
        let u = (oracle.b - oracle.a) / oracle.length();
        let axis = Vec2::new(u.y, -u.x);
        let depth = |s: &Segment| (s.a - oracle.a).dot(axis);
        for (ours, want) in [(&p.entrance, &entrance), (&p.exit, &exit)] {
            end_err = end_err.max((depth(ours) - depth(want)).abs());
            if ours != &p.narrowest {
                let line = gap(&a.vertices, &b.vertices, ours.a, u).ok_or_else(|| format!("seed {seed}: no gap"))?;
                ensure(ours.a.dist(line.a) <= 1e-6 && ours.b.dist(line.b) <= 1e-6, || {
                    format!("seed {seed}: end segment is not the free gap on its line")
                })?;
            }
        }
    }
    ensure(width_err <= 1e-4, || format!("width error {width_err:.2e} > 1e-4"))?;
    ensure(end_err <= params.kappa, || {
        format!("endpoint error {end_err:.3} > kappa")
    })?;
    Ok(format!(
        "50 pairs, width error {width_err:.1e} m, endpoint error {end_err:.4} m"
    ))
}

fn conflict_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alpha = -0.3;
    for _ in 0..10_000 {
        let s = rng.gen_range(-50.0..50.0);
        let a = TimeSpan::new(s, s + rng.gen_range(0.0..10.0));
        let s = rng.gen_range(-50.0..50.0);
        let b = TimeSpan::new(s, s + rng.gen_range(0.0..10.0));
        let ci = span_conflict(&a, &b, alpha);
        ensure((0.0..=1.0).contains(&ci), || format!("index {ci} outside [0,1]"))?;
        if a.overlaps(&b) {
            ensure(ci == 1.0, || format!("overlap gives {ci}"))?;
        } else {
            let delta = (a.start.max(b.start) - a.end.min(b.end)).abs();
            let direct = (alpha * delta).exp();
            ensure((ci - direct).abs() <= 1e-12, || format!("{ci} vs direct {direct}"))?;
        }
    }
    let a = TimeSpan::new(0.0, 1.0);
    let grid: Vec<f64> = (1..=100)
        .map(|k| span_conflict(&a, &TimeSpan::new(1.0 + 0.1 * k as f64, 2.0 + 0.1 * k as f64), alpha))
        .collect();
    ensure(grid.windows(2).all(|w| w[1] < w[0]), || {
        "not strictly decreasing".into()
    })?;
    Ok("10000 random span pairs and a 100-point gap grid".into())
}

fn mpc_correctness() -> Outcome {
    let params = MpcParams::default();
    let d = params.dynamics();
    let w = params.weights();
    let (mut rel, mut viol, mut chain) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20 {
        let inst = random_instance(seed, &params);
        let traj = solve_mpc(&inst.x0, &inst.planes, &inst.tractive, &d, &w);
        ensure(traj.info.status == SolveStatus::Optimal, || {
            format!("seed {seed}: {:?}", traj.info.status)
        })?;
        let mut prev = traj.start;
        for (x, &u) in traj.states.iter().zip(&traj.inputs) {
            let next = propagate(&prev, u, traj.h);
            chain = chain.max(next.p.dist(x.p)).max(next.v.dist(x.v));
            viol = viol.max(x.v.norm() - d.v_max).max(u.norm() - d.u_max);
            prev = next;
        }
        for hp in &inst.planes {
            viol = viol.max(-hp.slack(traj.states[hp.step - 1].p));
        }
        let (prob, constant) = mpc_problem(
            &inst.x0,
            &inst.planes,
            &inst.tractive,
            &d,
            &w,
            &SolverOptions::default(),
        );
        let oracle = common::qp_oracle::solve(&prob.p, &prob.q, &prob.a, &prob.l, &prob.u, 20_000);
        let best = oracle.primal + constant;
        rel = rel.max((traj.info.objective - best).abs() / best.abs().max(1e-3));
    }
    ensure(rel <= 1e-4, || format!("objective relative error {rel:.2e} > 1e-4"))?;
    ensure(viol <= 1e-6, || format!("constraint violation {viol:.2e} > 1e-6"))?;
    ensure(chain <= 1e-9, || format!("dynamics chaining error {chain:.2e} > 1e-9"))?;
    Ok(format!(
        "20 instances, objective error {rel:.1e} rel, violation {:.1e}, chaining {chain:.1e}",
        viol.max(0.0)
    ))
}

struct Runs {
    scattered: RunResult,
    dense: Vec<RunRow>,
    dense_secs: f64,
    corridor: Vec<RunResult>,
    corridor_no_replan: Vec<RunResult>,
}

fn dense_arms() -> [Arm; 3] {
    [
        Arm {
            planner: PlannerVariant::Astar,
            replan: true,
        },
        Arm {
            planner: PlannerVariant::Homotopy,
            replan: false,
        },
        Arm {
            planner: PlannerVariant::Homotopy,
            replan: true,
        },
    ]
}

fn simulate() -> Runs {
    let scattered = run(&presets::scattered(), &RunConfig::default())
        .expect("scattered run")
        .result;

    let cfg = BatchConfig {
        preset: Some("dense6x6".into()),
        seeds: (0..10).collect(),
        files: vec![],
        arms: dense_arms().to_vec(),
        repetitions: 1,
        output: "unused".into(),
        timeout: Some(100.0),
    };
    let start = Instant::now();
    let scenarios = batch_scenarios(&cfg).expect("dense scenarios");
    let dense = run_batch(&cfg, &scenarios, thread_count()).expect("dense batch");
    let dense_secs = start.elapsed().as_secs_f64();

    let corridor_run = |replan: bool| -> Vec<RunResult> {
        (0..5)
            .map(|seed| {
                let cfg = RunConfig {
                    replan,
                    ..RunConfig::default()
                };
                run(&presets::corridor4(seed), &cfg).expect("corridor run").result
            })
            .collect()
    };
    Runs {
        scattered,
        dense,
        dense_secs,
        corridor: corridor_run(true),
        corridor_no_replan: corridor_run(false),
    }
}

fn safety(runs: &Runs) -> Outcome {
    let radius = 0.2;
    let mut min_distance = f64::INFINITY;
    let mut min_clearance = f64::INFINITY;
    let mut audited = 0;
    let mut check = |r: &RunResult| -> Result<(), String> {
        if !r.success {
            return Ok(());
        }
        audited += 1;
        min_distance = min_distance.min(r.safety.min_distance);
        min_clearance = min_clearance.min(r.safety.min_clearance);
        ensure(r.safety.violation_count == 0, || {
            format!("{}: {:?}", r.arm, r.safety.violations)
        })
    };
    check(&runs.scattered)?;
    runs.corridor
        .iter()
        .chain(&runs.corridor_no_replan)
        .try_for_each(&mut check)?;
    for row in runs.dense.iter().filter(|r| r.success) {
        audited += 1;
        min_distance = min_distance.min(row.min_distance);
        ensure(row.violations == 0, || {
            format!("dense seed {:?} arm {}", row.seed, row.arm)
        })?;
    }
    ensure(min_distance >= 2.0 * radius - 1e-3, || {
        format!("min distance {min_distance:.4}")
    })?;
    ensure(min_clearance >= -1e-3, || format!("min clearance {min_clearance:.4}"))?;
    Ok(format!(
        "{audited} successful runs, min distance {min_distance:.4} m, min obstacle clearance {min_clearance:.4} m"
    ))
}

fn scattered(runs: &Runs) -> Outcome {
    let r = &runs.scattered;
    let makespan = r
        .makespan
        .ok_or_else(|| format!("{} of 8 agents arrived", (r.swarm_rate * 8.0).round()))?;
    ensure(r.success, || "not every agent arrived".into())?;
    ensure(makespan <= 40.0, || format!("makespan {makespan:.1} s"))?;
    ensure(r.plan_timing.max_ms <= 100.0, || {
        format!("plan time {:.1} ms", r.plan_timing.max_ms)
    })?;
    ensure(r.mpc_timing.max_ms <= 50.0, || {
        format!("MPC solve {:.1} ms", r.mpc_timing.max_ms)
    })?;
    Ok(format!(
        "makespan {makespan:.1} s, max plan {:.2} ms, max MPC solve {:.2} ms",
        r.plan_timing.max_ms, r.mpc_timing.max_ms
    ))
}

fn ablation(runs: &Runs) -> Outcome {
    let metrics = aggregate(&runs.dense);
    let rate = |label: &str| {
        metrics
            .iter()
            .find(|m| m.arm == label)
            .map(|m| m.swarm_rate)
            .ok_or_else(|| format!("arm {label} missing"))
    };
    let [a, b, c] = dense_arms().map(|arm| rate(&arm.label()));
    let (a, b, c) = (a?, b?, c?);
    let summary = format!(
        "swarm success (a) {:.1}%, (b) {:.1}%, (c) {:.1}%, {:.0} s",
        100.0 * a,
        100.0 * b,
        100.0 * c,
        runs.dense_secs
    );
    ensure(c >= b && b >= a, || format!("ordering broken: {summary}"))?;
    ensure(c - a >= 0.30, || format!("(c) - (a) below 30 points: {summary}"))?;
    ensure(c >= 0.70, || format!("(c) below 70%: {summary}"))?;
    ensure(runs.dense_secs <= 1800.0, || format!("too slow: {summary}"))?;
    Ok(summary)
}

fn corridor(runs: &Runs) -> Outcome {
    let ok = runs.corridor.iter().filter(|r| r.success).count();
    let replans: usize = runs.corridor.iter().map(|r| r.replans).sum();
    let plain = runs.corridor_no_replan.iter().filter(|r| r.success).count();
    let summary = format!("with replanning {ok}/5 (N_r = {replans}), without {plain}/5");
    ensure(ok >= 4, || summary.clone())?;
    ensure(replans > 0, || format!("no replans: {summary}"))?;
    Ok(summary)
}

fn determinism() -> Outcome {
    let s = presets::scattered();
    let a = run(&s, &RunConfig::default())
        .map_err(|e| e.to_string())?
        .trace
        .to_jsonl();
    let b = run(&s, &RunConfig::default())
        .map_err(|e| e.to_string())?
        .trace
        .to_jsonl();
    ensure(a == b, || "traces differ".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn priority_asymmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut trials, mut seed) = (0, 1000);
    while trials < 100 {
        seed += 1;
        let case = random_case(seed);
        let n = case.verts.len();
        let set = PassageSet::from_passages(case.passages.clone());
        let g = annotate_crossings(&VoronoiGraph::from_parts(case.verts.clone(), &case.edges), &set);
        let ctx = PlanContext {
            graph: &g,
            obstacles: &[],
            passages: &set,
            l_max: 1.0,
        };
        let agent = case.higher.len() + 1;
        let plan = |maps: &[PassageTimeMap]| {
            plan_path(
                &ctx,
                agent,
                case.verts[0],
                case.verts[n - 1],
                case.t0,
                maps,
                &case.params,
            )
            .ok()
        };
        let Some(base) = plan(&case.higher) else { continue };
        let mut lower = PassageTimeMap::new(agent + rng.gen_range(1..4));
        for p in &case.passages {
            let t = rng.gen_range(0.0..40.0);
            lower
                .entries
                .insert(p.id, vec![TimeSpan::new(t, t + rng.gen_range(0.1..20.0))]);
        }
        let mut maps = case.higher.clone();
        maps.push(lower);
        let again = plan(&maps).ok_or_else(|| format!("seed {seed}: plan lost"))?;
        ensure(again.path == base.path && again.cost == base.cost, || {
            format!("seed {seed}: plan changed")
        })?;
        trials += 1;
    }
    Ok("100 trials, plans unchanged".into())
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, outcome: Outcome| match &outcome {
        Ok(detail) => println!("criterion {n}: PASS ({detail})"),
        Err(why) => {
            failed += 1;
            println!("criterion {n}: FAIL ({why})");
        }
    };
    report(1, optimality());
    report(2, passage_detection());
    report(3, conflict_properties());
    report(4, mpc_correctness());
    let runs = simulate();
    report(5, safety(&runs));
    report(6, scattered(&runs));
    report(7, ablation(&runs));
    report(8, corridor(&runs));
    report(9, determinism());
    report(10, priority_asymmetry());
    if failed > 0 {
        std::process::exit(1);
    }
}
