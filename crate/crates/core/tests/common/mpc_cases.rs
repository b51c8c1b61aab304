//! Seeded random MPC instances.

use homoplan::mpc::{braking_inputs, propagate, AgentState, ConstraintSource, Hyperplane, MpcParams, Trajectory};
use homoplan::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub x0: AgentState,
    pub planes: Vec<Hyperplane>,
    pub tractive: Vec<Vec2>,
}

/// Random instance that the braking trajectory satisfies, so it is
/// feasible by construction.
pub fn random_instance(seed: u64, params: &MpcParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.dynamics();
    let v = Vec2::from_angle(rng.gen_range(0.0..6.3)) * rng.gen_range(0.0..0.8);
    let x0 = AgentState {
        p: Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        v,
        t: 0.0,
    };
    let heading = Vec2::from_angle(rng.gen_range(0.0..6.3));
    let speed = rng.gen_range(0.2..1.2);
    let tractive: Vec<Vec2> = (1..=d.k).map(|k| x0.p + heading * (speed * d.h * k as f64)).collect();
    let brake = Trajectory::rollout(
        0,
        x0,
        braking_inputs(&x0, &d),
        d.h,
        Trajectory::hold(0, x0, 1, d.h).info,
    );
    let mut planes = Vec::new();
    for _ in 0..rng.gen_range(1..=6) {
        // normals leaning against the direction of travel, so they bind
        let a = (-heading + Vec2::from_angle(rng.gen_range(0.0..6.3)) * 0.7)
            .normalized()
            .unwrap();
        for step in 1..=d.k {
            planes.push(Hyperplane {
                a,
                b: a.dot(brake.states[step - 1].p) - rng.gen_range(0.0..0.4),
                step,
                source: ConstraintSource::Agent(1),
            });
        }
    }
    Instance { x0, planes, tractive }
}

pub fn check_dynamics(t: &Trajectory) {
    let mut x = t.start;
    for (k, &u) in t.inputs.iter().enumerate() {
        x = propagate(&x, u, t.h);
        assert!((x.p - t.states[k].p).norm() <= 1e-9);
        assert!((x.v - t.states[k].v).norm() <= 1e-9);
    }
}
