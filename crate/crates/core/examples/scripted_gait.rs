//! A hand-written gait: sweep every fingertip around the disc, then lift,
//! return and replace one finger at a time. Reports the same per-episode
//! metrics as policy evaluation.
//!
//!     cargo run --release --example scripted_gait -- [sweep rate]

use dexplore::exp::ExperimentConfig;
use dexplore::rl::{run_episode, Env, ScriptedGait};

fn main() -> dexplore::Result<()> {
    let rate: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.04);
    let cfg = ExperimentConfig::defaults();
    let sim = cfg.simulator()?;
    let start = cfg.initial_state(&sim)?;
    let mut env = Env::new(sim, cfg.train.reward.clone(), start);
    let mut gait = ScriptedGait::new(rate);
    let ep = run_episode(&mut env, |e| gait.act(e))?;
    println!(
        "rotation {:.3} rad = {:.3} revolutions over {} steps ({:.3} rad/s), ended by {:?}",
        ep.rotation, ep.revolutions, ep.length, ep.mean_speed, ep.end
    );
    Ok(())
}
