//! Grows action-sampling trees with different numbers of candidate actions
//! per extension and prints their coverage. More candidates per step reach
//! further for the same number of iterations.
//!
//!     cargo run --release --example explore_grrt -- [iterations]

use dexplore::exp::ExperimentConfig;
use dexplore::planner::{grow_grrt, PlannerConfig};

fn main() -> dexplore::Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let cfg = ExperimentConfig::defaults();
    let sim = cfg.simulator()?;
    let root = cfg.initial_state(&sim)?;
    for k in [1, 8, 64] {
        let pc = PlannerConfig {
            n_max: iterations,
            max_iterations: iterations,
            k_max: k,
            seed: 3,
            ..PlannerConfig::default()
        };
        let t = std::time::Instant::now();
        let out = grow_grrt(&sim, &root, &pc)?;
        println!(
            "K = {k:>2}: {:>5} nodes, max rotation {:6.3} rad ({:.1} s)",
            out.tree.len(),
            out.tree.max_rotation(),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
