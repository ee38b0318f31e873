mod common;

use common::seeded;
use dexplore::hand::{
    touching_configuration, Category, FingerSpec, HandModel, ObjectShape, Pose2, State,
};
use dexplore::rl::GraspSampler;
use dexplore::sim::{Action, SimConfig, SimState, Simulator};
use rand::Rng;
use std::f64::consts::FRAC_PI_2;

fn disc_sim(cfg: impl FnOnce(&mut SimConfig)) -> Simulator {
    let shape = ObjectShape::preset("disc").unwrap();
    let mut c = SimConfig::for_shape(&shape);
    cfg(&mut c);
    Simulator::new(HandModel::reference(), shape, c).unwrap()
}

fn grasped(sim: &Simulator) -> SimState {
    sim.canonical_grasp(0.002, 0.5).unwrap()
}

fn random_walk<R: Rng>(sim: &Simulator, s: &mut SimState, n: usize, rng: &mut R) -> Vec<Action> {
    let mut actions = Vec::new();
    for _ in 0..n {
        let a = Action(s.state.q.iter().map(|q| q + rng.gen_range(-0.05..0.05)).collect());
        *s = sim.step(s, &a).unwrap().0;
        actions.push(a);
    }
    actions
}

fn replay(sim: &Simulator, mut s: SimState, actions: &[Action]) -> SimState {
    for a in actions {
        s = sim.step(&s, a).unwrap().0;
    }
    s
}

#[test]
fn object_settles_on_two_supporting_tips() {
    // Two straight fingers pointing up, 2 cm either side of the disc axis.
    let up = |x: f64| FingerSpec {
        base: [x, -0.12],
        base_angle: FRAC_PI_2,
        links: [0.04, 0.035],
        limits: [[-1.0, 1.0], [-1.0, 1.0]],
    };
    let model = HandModel::new(vec![up(-0.02), up(0.02)], 0.008).unwrap();
    let shape = ObjectShape::disc("disc", 0.035, Category::Easy).unwrap();
    let cfg = SimConfig::for_shape(&shape);
    let weight = cfg.mass * cfg.gravity;
    let bound = 2.0 * weight / cfg.contact_stiffness;
    let tip_y = -0.12 + 0.075;
    let reach = 0.035 + 0.008;
    let y0 = tip_y + (reach * reach - 0.02 * 0.02_f64).sqrt();
    let sim = Simulator::new(model, shape, cfg).unwrap();
    let mut s = SimState::at_rest(State::new(vec![0.0; 4], Pose2::new(0.0, y0, 0.0)));
    let mut heights = Vec::new();
    for _ in 0..sim.config().rollout_steps() {
        sim.advance(&mut s, None);
        heights.push(s.state.pose.y);
    }
    let contacts = sim.contacts(&s.state);
    assert_eq!(contacts.count(), 2);
    for c in contacts.active() {
        assert!(c.depth > 0.0 && c.depth < bound, "depth {} bound {bound}", c.depth);
    }
    // the spring oracle: each tip carries W / (2 cos phi) along its normal
    let cos_phi = (y0 - tip_y) / reach;
    let expected = weight / (2.0 * cos_phi) / sim.config().contact_stiffness;
    for c in contacts.active() {
        assert!((c.depth - expected).abs() < 0.2 * expected, "{} vs {expected}", c.depth);
    }
    let tail = &heights[heights.len() / 2..];
    let drift = tail.iter().cloned().fold(f64::MIN, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
    assert!(drift < 1e-3, "drift {drift}");
    assert!((s.state.pose.y - y0).abs() < 1e-3);
}

#[test]
fn rollout_check_is_a_plain_re_execution() {
    let sim = disc_sim(|_| {});
    let root = grasped(&sim);
    let mut rng = seeded(10);
    let mut agree = [0usize; 2];
    for _ in 0..50 {
        // a few random extensions from the grasp, as G-RRT would try them
        let mut s = root.clone();
        for _ in 0..rng.gen_range(1..4) {
            let a: Vec<f64> = s.state.q.iter().map(|q| q + rng.gen_range(-0.15..=0.15)).collect();
            sim.control(&mut s, &Action(a)).unwrap();
        }
        let before = s.clone();
        let fast = sim.rollout_stability_check(&s);
        assert_eq!(s, before, "check mutated its input");
        let mut manual = s.clone();
        let mut ok = !sim.is_dropped(&manual);
        for _ in 0..500 {
            let hold = Action(manual.setpoints.clone());
            manual = sim.step(&manual, &hold).unwrap().0;
            ok &= manual.state.pose.y >= -0.1;
        }
        assert_eq!(fast, ok);
        agree[ok as usize] += 1;
    }
    assert!(agree[1] > 0, "no stable candidates in the sample: {agree:?}");
}

#[test]
fn held_grasp_without_gravity_survives_the_check() {
    let sim = disc_sim(|c| c.gravity = 0.0);
    assert!(sim.rollout_stability_check(&grasped(&sim)));
    let mut low = grasped(&sim);
    low.state.pose.y = -0.11;
    assert!(!sim.rollout_stability_check(&low));
}

#[test]
fn touching_grasp_without_gravity_is_a_fixed_point() {
    let sim = disc_sim(|c| c.gravity = 0.0);
    let q = touching_configuration(sim.model(), sim.shape(), Pose2::default(), 1e-6).unwrap();
    let s = SimState::at_rest(State::new(q, Pose2::default()));
    assert_eq!(sim.contacts(&s.state).count(), 4);
    let (next, _) = sim.step(&s, &Action(s.state.q.clone())).unwrap();
    for (a, b) in next.to_vec().iter().zip(s.to_vec()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn snapshot_restore_replays_bit_identically() {
    let sim = disc_sim(|_| {});
    let start = grasped(&sim);
    let snap = sim.snapshot(&start);
    let mut s = start.clone();
    let actions = random_walk(&sim, &mut s, 100, &mut seeded(11));
    let again = replay(&sim, sim.restore(&snap), &actions);
    assert_eq!(again, s);

    let fresh = disc_sim(|_| {});
    assert_eq!(replay(&fresh, fresh.restore(&snap), &actions), s);
}

#[test]
fn file_round_trip_preserves_trajectories() {
    let sim = disc_sim(|_| {});
    let mut mid = grasped(&sim);
    random_walk(&sim, &mut mid, 37, &mut seeded(12));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.txt");
    std::fs::write(&path, mid.to_record()).unwrap();
    let back = SimState::from_record(8, &std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, mid);
    let mut a = mid.clone();
    let actions = random_walk(&sim, &mut a, 60, &mut seeded(13));
    assert_eq!(replay(&sim, back, &actions), a);
}

#[test]
fn free_joints_track_setpoints() {
    let sim = disc_sim(|c| c.gravity = 0.0);
    let cfg = sim.config().clone();
    // Fingers folded away from the object.
    let q0 = vec![-1.6, 0.0, -1.6, 0.0, -1.6, 0.0, -1.6, 0.0];
    let mut rng = seeded(14);
    for _ in 0..20 {
        let mut s = SimState::at_rest(State::new(q0.clone(), Pose2::new(0.0, 0.0, 0.0)));
        let target: Vec<f64> = q0
            .iter()
            .enumerate()
            .map(|(k, q)| if k % 2 == 0 { q + rng.gen_range(0.0..0.6) } else { rng.gen_range(0.0..1.0) })
            .collect();
        sim.apply_action(&mut s, &Action(target.clone())).unwrap();
        let span = q0.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let steps = ((span / cfg.velocity_limit + 5.0 * cfg.dt) / cfg.dt).ceil() as usize;
        let mut prev: Vec<f64> = q0.iter().zip(&target).map(|(a, b)| (a - b).abs()).collect();
        for _ in 0..steps {
            sim.advance(&mut s, None);
            assert_eq!(sim.contacts(&s.state).count(), 0);
            for k in 0..8 {
                let e = (s.state.q[k] - target[k]).abs();
                assert!(e <= prev[k] + 1e-15, "joint {k} moved away");
                prev[k] = e;
            }
        }
        // past the saturated phase the servo is in its linear band
        assert!(prev.iter().all(|e| *e < 0.02), "{prev:?}");
    }
}

#[test]
fn reported_forces_are_the_integrated_forces() {
    let sim = disc_sim(|c| c.gravity = 0.0);
    let (m, inertia, dt) = (sim.config().mass, sim.config().inertia, sim.config().dt);
    let mut s = grasped(&sim);
    let mut rng = seeded(15);
    let mut checked = 0;
    for _ in 0..200 {
        let a = Action(s.state.q.iter().map(|q| q + rng.gen_range(-0.1..0.1)).collect());
        let (next, info) = sim.step(&s, &a).unwrap();
        let center = s.state.pose.position();
        let contacts = sim.contacts(&s.state);
        let mut f = [0.0; 3];
        for (i, fi) in info.forces.iter().enumerate() {
            if fi == &[0.0, 0.0] {
                continue;
            }
            let r = contacts.get(i).unwrap().point - center;
            f[0] += fi[0];
            f[1] += fi[1];
            f[2] += r.x * fi[1] - r.y * fi[0];
        }
        let dv = [
            m * (next.velocity[0] - s.velocity[0]) / dt,
            m * (next.velocity[1] - s.velocity[1]) / dt,
            inertia * (next.velocity[2] - s.velocity[2]) / dt,
        ];
        let scale = 1.0 + f.iter().map(|x| x.abs()).sum::<f64>();
        for k in 0..3 {
            assert!((dv[k] - f[k]).abs() < 1e-8 * scale, "axis {k}: {} vs {}", dv[k], f[k]);
        }
        checked += info.forces.iter().filter(|f| f != &&[0.0, 0.0]).count();
        s = next;
    }
    assert!(checked > 0);
}

#[test]
fn sampled_grasps_do_not_sink_in() {
    for mass in [0.1, 0.5] {
        let shape = ObjectShape::preset("l_polygon").unwrap();
        let mut cfg = SimConfig::for_shape(&shape);
        cfg.inertia *= mass / cfg.mass;
        cfg.mass = mass;
        let sim = Simulator::new(HandModel::reference(), shape, cfg).unwrap();
        let sampler = GraspSampler::default();
        let mut rng = seeded(16);
        for _ in 0..5 {
            let (mut s, _) = sampler.sample(&sim, &mut rng).unwrap();
            for _ in 0..500 {
                sim.advance(&mut s, None);
                let deepest = sim.contacts(&s.state).active().map(|c| c.depth).fold(0.0, f64::max);
                assert!(deepest < 0.005, "mass {mass}: {deepest}");
            }
        }
    }
}
