mod common;

use common::seeded;
use dexplore::exp::ExperimentConfig;
use dexplore::hand::{place_fingertip, Pose2};
use dexplore::planner::PlannerKind;
use dexplore::resets::ResetSet;
use dexplore::rl::{
    collect_rollouts, gradient_check, observe, Checkpoint, observe_critic, obs_dim, ppo_loss, reward, run_episode,
    terminate, update_policy, Adam, Batch, Env, EnvSlot, ExploredBuffer, GraspSampler, Mlp, PolicyParams,
    PpoConfig, ResetDistribution, RewardConfig, ScriptedGait, Termination, TrainConfig, Trainer,
};
use dexplore::sim::{SimState, Simulator};
use rand::Rng;

fn setup() -> (Simulator, SimState) {
    let cfg = ExperimentConfig::defaults();
    let sim = cfg.simulator().unwrap();
    let root = cfg.initial_state(&sim).unwrap();
    (sim, root)
}

/// The grasp with finger 3 lifted 2 cm off the surface.
fn three_finger(sim: &Simulator, root: &SimState) -> SimState {
    let [a, b] = place_fingertip(sim.model(), sim.shape(), &root.state, 3, 0.02, 1e-8, 200).unwrap();
    let mut s = root.clone();
    s.state.q[6] = a;
    s.state.q[7] = b;
    s.setpoints[6] = a;
    s.setpoints[7] = b;
    s
}

fn slots(sim: &Simulator, start: &SimState, n: usize, rc: &RewardConfig) -> Vec<EnvSlot> {
    (0..n).map(|_| EnvSlot::new(Env::new(sim.instance(), rc.clone(), start.clone()))).collect()
}

fn small_batch(n_steps: usize) -> (PolicyParams, Batch) {
    let (sim, root) = setup();
    let params = PolicyParams::new(4, 16, -0.5, &mut seeded(40));
    let mut s = slots(&sim, &root, 2, &RewardConfig::default());
    let dist = ResetDistribution::FixedInit(root);
    let roll = collect_rollouts(&params, &mut s, &dist, n_steps, &PpoConfig::default(), 1, 0).unwrap();
    (params, roll.batch)
}

#[test]
fn free_floating_object_reports_no_contacts() {
    let (sim, root) = setup();
    let mut s = root.clone();
    s.state.pose.y = 0.3;
    let rc = RewardConfig::default();
    let o = observe(&s, &sim.probe(&s), &rc);
    assert_eq!(o.contacts, vec![false; 4]);
    assert_eq!(o.q, s.state.q);
    assert_eq!(o.setpoints, s.setpoints);
    assert_eq!(o.to_vec().len(), obs_dim(4));
    // the actor sees nothing of the object pose
    let mut moved = s.clone();
    moved.state.pose = Pose2::new(0.2, 0.25, 1.0);
    assert_eq!(observe(&moved, &sim.probe(&moved), &rc).to_vec(), o.to_vec());
    let c = observe_critic(&s, &sim.probe(&s), &rc);
    assert!(c.to_vec().iter().all(|v| v.is_finite()));
}

#[test]
fn contact_flags_agree_with_geometry() {
    let (sim, root) = setup();
    let s = three_finger(&sim, &root);
    let o = observe(&s, &sim.probe(&s), &RewardConfig::default());
    let geometric: Vec<bool> = (0..4).map(|f| sim.contacts(&s.state).is_active(f)).collect();
    assert_eq!(o.contacts, geometric);
    assert_eq!(o.contacts, vec![true, true, true, false]);
    // a high report threshold hides the light contacts
    let strict = RewardConfig {
        contact_threshold: 1e3,
        ..RewardConfig::default()
    };
    assert_eq!(observe(&s, &sim.probe(&s), &strict).contact_count(), 0);
}

#[test]
fn reward_terms() {
    let (sim, mut root) = setup();
    root.velocity = [0.0; 3];
    let rc = RewardConfig::default();
    let dt = sim.config().control_interval();
    let start = [root.state.pose.x, root.state.pose.y];
    let still = root.clone();
    assert_eq!(reward(&root, &still, 3, start, dt, &rc), 0.0);

    let mut turned = root.clone();
    turned.state.pose.theta += 0.5 * dt;
    assert!((reward(&root, &turned, 3, start, dt, &rc) - 0.5).abs() < 1e-12);
    assert_eq!(reward(&root, &turned, 2, start, dt, &rc), 0.0);

    let mut fast = root.clone();
    fast.state.pose.theta += 5.0 * dt;
    assert!((reward(&root, &fast, 4, start, dt, &rc) - rc.omega_max).abs() < 1e-12);

    let mut slid = turned.clone();
    slid.state.pose.x += 0.01;
    slid.velocity = [0.3, 0.4, 0.0];
    let penalty = rc.w_v * 0.5 + rc.w_pos * 0.01;
    assert!((reward(&root, &slid, 3, start, dt, &rc) - (0.5 - penalty)).abs() < 1e-12);
    assert!((reward(&root, &slid, 1, start, dt, &rc) + penalty).abs() < 1e-12);
}

#[test]
fn termination_reasons() {
    let (sim, root) = setup();
    let rc = RewardConfig::default();
    assert_eq!(terminate(&sim, &root, 3, 0, &rc), None);
    assert_eq!(terminate(&sim, &root, 1, 0, &rc), Some(Termination::Contacts));
    assert_eq!(terminate(&sim, &root, 4, rc.horizon, &rc), Some(Termination::Horizon));
    let mut low = root.clone();
    low.state.pose.y = -0.2;
    assert_eq!(terminate(&sim, &low, 4, 0, &rc), Some(Termination::Dropped));
}

#[test]
fn reset_distributions_draw_as_specified() {
    let (sim, root) = setup();
    let mut rng = seeded(41);
    let fi = ResetDistribution::FixedInit(root.clone());
    for _ in 0..10 {
        assert_eq!(fi.sample(&sim, &mut rng).unwrap(), root);
    }

    let other = three_finger(&sim, &root);
    let set = ResetSet {
        states: vec![root.clone(), other],
        tree_sha256: String::new(),
        planner: PlannerKind::Grrt,
        object: "disc".into(),
        fingers: 4,
        k: 10,
        cap: 10,
        leaves: vec![],
        meta: vec![],
    };
    let tree = ResetDistribution::TreeResets(set);
    let n = 10_000;
    let hits = (0..n).filter(|_| tree.sample(&sim, &mut rng).unwrap() == root).count();
    assert!((hits as f64 / n as f64 - 0.5).abs() < 0.02, "{hits}");

    let sgs = ResetDistribution::StableGraspSampler(GraspSampler::default());
    for _ in 0..3 {
        let s = sgs.sample(&sim, &mut rng).unwrap();
        assert!(sim.contacts(&s.state).count() >= 3);
        assert!(sim.rollout_stability_check(&s));
    }
}

#[test]
fn grasp_sampler_struggles_on_the_l_shape() {
    let cfg = ExperimentConfig::parse("[object]\nname = l_polygon\n", std::iter::empty()).unwrap();
    let sim = cfg.simulator().unwrap();
    let disc = setup().0;
    let g = GraspSampler::default();
    let hard = g.rejection_rate(&sim, 20, &mut seeded(42)).unwrap();
    let easy = g.rejection_rate(&disc, 20, &mut seeded(42)).unwrap();
    eprintln!("grasp sampler rejection: disc {easy:.3}, l_polygon {hard:.3}");
    assert!(hard > easy);
    let none = GraspSampler {
        max_attempts: 1,
        min_contacts: 5,
        ..GraspSampler::default()
    };
    assert!(none.sample(&sim, &mut seeded(43)).is_err());
}

#[test]
fn rollout_edge_cases() {
    let (sim, root) = setup();
    let params = PolicyParams::new(4, 8, -0.5, &mut seeded(44));
    let dist = ResetDistribution::FixedInit(root.clone());
    let ppo = PpoConfig::default();
    let rc = RewardConfig::default();
    let empty = collect_rollouts(&params, &mut slots(&sim, &root, 3, &rc), &dist, 0, &ppo, 1, 0).unwrap();
    assert!(empty.batch.is_empty() && empty.episodes.is_empty());

    // Needing more contacts than there are fingers ends every episode at
    // its first step.
    let hopeless = RewardConfig {
        min_contacts: 5,
        ..rc.clone()
    };
    let r = collect_rollouts(&params, &mut slots(&sim, &root, 2, &hopeless), &dist, 7, &ppo, 1, 0).unwrap();
    assert_eq!(r.episodes.len(), 14);
    assert!(r.episodes.iter().all(|e| e.length == 1 && e.end == Termination::Contacts));

    let run = || collect_rollouts(&params, &mut slots(&sim, &root, 2, &rc), &dist, 30, &ppo, 9, 3).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.batch, b.batch);
    assert_eq!(a.episodes, b.episodes);
}

#[test]
fn explored_buffer_holds_visited_live_states() {
    let (sim, root) = setup();
    let params = PolicyParams::new(4, 8, 0.0, &mut seeded(45));
    let rc = RewardConfig::default();
    let mut dist = ResetDistribution::ExploredRestarts {
        initial: root.clone(),
        buffer: ExploredBuffer::new(100_000),
        initial_prob: 0.5,
    };
    let roll = collect_rollouts(&params, &mut slots(&sim, &root, 2, &rc), &dist, 40, &PpoConfig::default(), 2, 0).unwrap();
    assert_eq!(roll.visited.len() + roll.episodes.len(), 80);
    let visited = roll.visited.clone();
    dist.record(roll.visited, &mut seeded(46));
    let ResetDistribution::ExploredRestarts { buffer, .. } = &dist else { unreachable!() };
    assert_eq!(buffer.states, visited);
    for s in &buffer.states {
        assert!(!sim.is_dropped(s));
        assert!(s != &root);
    }
    // draws come from the buffer or the initial state
    let mut rng = seeded(47);
    let mut from_initial = 0;
    for _ in 0..2000 {
        let s = dist.sample(&sim, &mut rng).unwrap();
        if s == root {
            from_initial += 1;
        } else {
            assert!(visited.contains(&s));
        }
    }
    assert!((from_initial as f64 / 2000.0 - 0.5).abs() < 0.05);
}

#[test]
fn episode_rotation_is_the_sum_of_steps() {
    let (sim, root) = setup();
    let params = PolicyParams::new(4, 8, -0.5, &mut seeded(48));
    let mut env = Env::new(sim, RewardConfig::default(), root);
    let mut rng = seeded(49);
    let mut total = 0.0;
    for _ in 0..60 {
        let (a, _) = params.act(&env.observation().to_vec(), &mut rng);
        let tr = env.step(&a).unwrap();
        total += tr.rotation;
        assert!((env.episode_rotation() - total).abs() < 1e-12);
        if tr.done.is_some() {
            break;
        }
    }
}

#[test]
fn zero_advantages_leave_only_the_entropy_gradient() {
    let (params, mut batch) = small_batch(16);
    batch.advantages.iter_mut().for_each(|a| *a = 0.0);
    let cfg = PpoConfig {
        entropy_coef: 0.01,
        ..PpoConfig::default()
    };
    let idx: Vec<usize> = (0..batch.len()).collect();
    let mut g = vec![0.0; params.len()];
    ppo_loss(&params, &batch, &idx, &cfg, Some(&mut g));
    let (actor, log_std, _) = params.split_mut(&mut g);
    assert!(actor.iter().all(|v| *v == 0.0));
    assert!(log_std.iter().all(|v| (*v + 0.01).abs() < 1e-15));
}

#[test]
fn zero_clip_freezes_the_actor() {
    let (mut params, batch) = small_batch(32);
    let before = params.clone();
    let cfg = PpoConfig {
        clip: 0.0,
        minibatch: 16,
        ..PpoConfig::default()
    };
    let mut opt = Adam::new(params.len(), cfg.lr);
    update_policy(&mut params, &mut opt, &batch, &cfg, &mut seeded(50)).unwrap();
    assert_eq!(params.actor, before.actor);
    assert_eq!(params.log_std, before.log_std);
    assert_ne!(params.critic, before.critic);
}

#[test]
fn single_transition_gradient_matches_differences() {
    let (mut params, batch) = small_batch(8);
    // Move away from the sampling policy so the ratio is not exactly one.
    let mut rng = seeded(51);
    let flat: Vec<f64> = params.to_flat().iter().map(|v| v + rng.gen_range(-0.01..0.01)).collect();
    params.set_flat(&flat);
    for i in 0..batch.len() {
        let one = Batch {
            obs: vec![batch.obs[i].clone()],
            critic_obs: vec![batch.critic_obs[i].clone()],
            actions: vec![batch.actions[i].clone()],
            log_probs: vec![batch.log_probs[i]],
            values: vec![batch.values[i]],
            advantages: vec![batch.advantages[i]],
            returns: vec![batch.returns[i]],
        };
        let err = gradient_check(&params, &one, &PpoConfig::default(), 64, &mut rng);
        assert!(err < 1e-3, "sample {i}: {err}");
    }
}

#[test]
fn tiny_network_gradient_is_exact() {
    let mut rng = seeded(52);
    let params = PolicyParams::with_sizes(&[4, 2, 1], &[4, 2, 1], -0.3, &mut rng);
    let batch = Batch {
        obs: vec![vec![0.3, -0.2, 0.5, 0.1]],
        critic_obs: vec![vec![-0.4, 0.2, 0.0, 0.7]],
        actions: vec![vec![0.25]],
        log_probs: vec![-0.8],
        values: vec![0.1],
        advantages: vec![0.7],
        returns: vec![1.2],
    };
    let cfg = PpoConfig {
        entropy_coef: 0.01,
        ..PpoConfig::default()
    };
    let err = gradient_check(&params, &batch, &cfg, 64, &mut seeded(53));
    assert!(err < 1e-5, "{err}");
    assert_eq!(err, gradient_check(&params, &batch, &cfg, 64, &mut seeded(53)));
}

#[test]
fn symmetric_network_has_symmetric_gradients() {
    let net = Mlp {
        sizes: vec![2, 2, 1],
        params: vec![0.3; Mlp::param_count(&[2, 2, 1])],
    };
    let tape = net.forward(&[0.5, 0.5]);
    let mut g = vec![0.0; net.params.len()];
    net.backward(&tape, &[1.0], &mut g);
    // [w00 w01 w10 w11 b0 b1 | v0 v1 c]
    assert_eq!(g[0], g[3]);
    assert_eq!(g[1], g[2]);
    assert_eq!(g[4], g[5]);
    assert_eq!(g[6], g[7]);
}

fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig {
        updates: 2,
        steps_per_update: 64,
        n_envs: 4,
        hidden: 16,
        eval_episodes: 2,
        seed,
        ppo: PpoConfig {
            minibatch: 32,
            ..PpoConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_reproducible() {
    let (sim, root) = setup();
    let run = |seed| {
        let dist = ResetDistribution::FixedInit(root.clone());
        let mut t = Trainer::new(sim.clone(), tiny_train(seed), dist, root.clone()).unwrap();
        let recs: Vec<_> = (0..2).map(|_| t.step().unwrap()).collect();
        (recs, t.params.clone(), t.evaluate().unwrap())
    };
    let a = run(5);
    assert_eq!(a, run(5));
    assert_ne!(a.1, run(6).1);
}

#[test]
fn scripted_gait_turns_the_disc() {
    let (sim, root) = setup();
    let mut env = Env::new(sim, RewardConfig::default(), root);
    let mut gait = ScriptedGait::new(0.04);
    let ep = run_episode(&mut env, |e| gait.act(e)).unwrap();
    assert!(ep.revolutions.abs() > 0.5, "{ep:?}");
}

#[test]
fn state_record_survives_a_policy_step() {
    let (sim, root) = setup();
    let mut env = Env::new(sim, RewardConfig::default(), root);
    env.step(&[0.3; 8]).unwrap();
    let s = &env.state;
    assert_eq!(&SimState::from_record(8, &s.to_record()).unwrap(), s);
}

#[test]
fn checkpoint_file_keeps_every_weight_bit() {
    let mut rng = seeded(60);
    let ck = Checkpoint {
        format: "dexplore-checkpoint".into(),
        version: 1,
        config_sha256: "abc".into(),
        seed: 3,
        update: 7,
        params: PolicyParams::new(4, 64, -0.5, &mut rng),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let bits = |c: &Checkpoint| c.params.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&ck));
}
