//! Tree to reset set: grows a small tree, keeps the highest-rotation paths,
//! checks every reset state, and round-trips the set through its file
//! format.
//!
//!     cargo run --release --example extract_resets

use dexplore::exp::ExperimentConfig;
use dexplore::planner::{grow_grrt, PlannerConfig};
use dexplore::resets::{build_reset_set, ExtractConfig, ResetSet};

fn main() -> dexplore::Result<()> {
    let cfg = ExperimentConfig::defaults();
    let sim = cfg.simulator()?;
    let root = cfg.initial_state(&sim)?;
    let pc = PlannerConfig {
        n_max: 1500,
        seed: 7,
        ..PlannerConfig::default()
    };
    let tree = grow_grrt(&sim, &root, &pc)?.tree;
    let (set, report) = build_reset_set(&tree, &sim, &ExtractConfig { k: 5, ..ExtractConfig::default() })?;
    for (leaf, len, rot) in &report.paths {
        println!("leaf {leaf:>5}: {len:>3} nodes, rotation {rot:.3} rad");
    }
    println!("{} reset states from a union of {}", set.len(), report.union);
    println!("states failing the hold check: {}", set.unstable(&sim).len());

    let back = ResetSet::from_text(&set.to_text())?;
    println!("file round trip exact: {}", back == set);
    Ok(())
}
