//! Grows a constraint-projection tree from the canonical grasp. Without a
//! dynamics model the tree stays inside the in-grasp workspace, so its
//! rotation saturates well below a full turn.
//!
//!     cargo run --release --example explore_mrrt -- [nodes] [object]

use dexplore::exp::ExperimentConfig;
use dexplore::planner::{grow_mrrt, PlannerConfig};
use dexplore::stability::StabilityConfig;

fn main() -> dexplore::Result<()> {
    let mut args = std::env::args().skip(1);
    let nodes: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let object = args.next().unwrap_or_else(|| "disc".into());
    let cfg = ExperimentConfig::parse(&format!("[object]\nname = {object}\n"), std::iter::empty())?;
    let sim = cfg.simulator()?;
    let root = cfg.initial_state(&sim)?;
    let pc = PlannerConfig {
        n_max: nodes,
        max_iterations: 20 * nodes,
        seed: 1,
        ..PlannerConfig::default()
    };
    let out = grow_mrrt(&cfg.hand, &cfg.object, &root.state, &StabilityConfig::for_shape(&cfg.object), &pc)?;
    for p in &out.coverage {
        println!("iter {:>6}  nodes {:>5}  max rotation {:.3}", p.iteration, p.nodes, p.max_rotation);
    }
    let worst = out.tree.nodes().iter().filter_map(|n| n.edge_residual).fold(0.0, f64::max);
    println!("largest edge constraint residual {worst:.2e}");
    Ok(())
}
