//! The whole batch pipeline through the library's command functions:
//! plan, extract, train, evaluate and plot, writing into a directory.
//!
//!     cargo run --release --example experiment_pipeline -- [out dir]

use std::path::PathBuf;

use dexplore::exp::{cmd_eval, cmd_extract, cmd_plan, cmd_plot, cmd_train, ExperimentConfig, PlotKind};

const CONFIG: &str = "
[planner]
n_max = 1000
[train]
reset = tree
updates = 10
eval_every = 5
[experiment]
seeds = 1, 2
";

fn main() -> dexplore::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into()));
    let cfg = ExperimentConfig::parse(CONFIG, std::iter::empty())?;
    println!("config hash {}", cfg.hash());
    let mut coverage = Vec::new();
    let mut evals = Vec::new();
    for &seed in &cfg.seeds {
        let plan = cmd_plan(&cfg, seed, &out)?;
        coverage.push(plan.coverage.clone());
        let ex = cmd_extract(&cfg, &plan.tree, &out)?;
        print!("{}", ex.summary);
        let tr = cmd_train(&cfg, seed, Some(&ex.resets), &out)?;
        evals.push(tr.eval.clone());
        let ev = cmd_eval(&cfg, &tr.checkpoint, 5, &out)?;
        println!("seed {seed}: median revolutions {:.3}", ev.summary.median_revolutions);
    }
    cmd_plot(&coverage, PlotKind::Coverage, &out.join("coverage.svg"))?;
    cmd_plot(&evals, PlotKind::Eval, &out.join("eval.svg"))?;
    println!("artifacts in {}", out.display());
    Ok(())
}
