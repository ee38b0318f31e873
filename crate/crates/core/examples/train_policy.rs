//! Short PPO run on the disc from a chosen reset distribution. The tree
//! distribution grows its own small exploration tree first.
//!
//!     cargo run --release --example train_policy -- [fi|sgs|er|tree] [updates]

use dexplore::exp::ExperimentConfig;
use dexplore::planner::{grow_grrt, PlannerConfig};
use dexplore::resets::build_reset_set;
use dexplore::rl::{summarize, ExploredBuffer, ResetDistribution, TrainConfig, Trainer};

fn main() -> dexplore::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind = args.next().unwrap_or_else(|| "tree".into());
    let updates: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let cfg = ExperimentConfig::defaults();
    let sim = cfg.simulator()?;
    let initial = cfg.initial_state(&sim)?;
    let dist = match kind.as_str() {
        "fi" => ResetDistribution::FixedInit(initial.clone()),
        "sgs" => ResetDistribution::StableGraspSampler(cfg.sgs.clone()),
        "er" => ResetDistribution::ExploredRestarts {
            initial: initial.clone(),
            buffer: ExploredBuffer::new(50_000),
            initial_prob: 0.5,
        },
        _ => {
            let pc = PlannerConfig {
                n_max: 2000,
                seed: 1,
                ..PlannerConfig::default()
            };
            let tree = grow_grrt(&sim, &initial, &pc)?.tree;
            let (set, _) = build_reset_set(&tree, &sim, &cfg.extract)?;
            println!("tree reaches {:.2} rad, {} reset states", tree.max_rotation(), set.len());
            ResetDistribution::TreeResets(set)
        }
    };
    let tc = TrainConfig {
        updates,
        eval_every: 10,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(sim, tc, dist, initial)?;
    for _ in 0..updates {
        let r = trainer.step()?;
        if trainer.eval_due() {
            let e = summarize(trainer.update, trainer.env_steps, &trainer.evaluate()?);
            println!(
                "update {:>4}  train rotation {:7.3}  eval rotation {:7.3}  entropy {:.2}",
                r.update, r.mean_rotation, e.mean_rotation, r.stats.entropy
            );
        }
    }
    Ok(())
}
