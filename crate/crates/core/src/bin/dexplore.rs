//! Experiment driver. Settings come from `--config` (sectioned key-value
//! file) with `DEXPLORE_<SECTION>__<KEY>` environment overrides.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dexplore::exp::{self, ExperimentConfig, PlotKind};
use dexplore::Error;

#[derive(Parser)]
#[command(name = "dexplore", version, about = "Exploration trees and reset distributions for in-hand rotation")]
struct Cli {
    /// Experiment config file; library defaults when omitted.
    #[arg(long, global = true, env = "DEXPLORE_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory (overrides `[experiment] out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow an exploration tree and record its coverage curve.
    Plan {
        /// Single seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract a reset set from a tree file.
    Extract {
        #[arg(long)]
        tree: PathBuf,
    },
    /// Train a policy under the configured reset distribution.
    Train {
        #[arg(long)]
        seed: Option<u64>,
        /// Reset-set file, required for the `tree` distribution.
        #[arg(long)]
        resets: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Render CSV files as an SVG line plot.
    Plot {
        /// coverage | train | eval
        #[arg(long)]
        kind: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> dexplore::Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::parse("", std::env::vars())?,
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    let seeds = |s: Option<u64>| s.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
    match cli.command {
        Command::Plan { seed } => {
            for seed in seeds(seed) {
                let a = exp::cmd_plan(&cfg, seed, &out)?;
                println!(
                    "seed {seed}: {} nodes, {} iterations, max rotation {:.4} rad -> {}",
                    a.output.tree.len(),
                    a.output.iterations,
                    a.output.tree.max_rotation(),
                    a.tree.display()
                );
            }
        }
        Command::Extract { tree } => {
            let a = exp::cmd_extract(&cfg, &tree, &out)?;
            print!("{}", a.summary);
            println!("-> {}", a.resets.display());
        }
        Command::Train { seed, resets } => {
            for seed in seeds(seed) {
                let a = exp::cmd_train(&cfg, seed, resets.as_deref(), &out)?;
                if let Some(e) = a.final_eval {
                    println!(
                        "seed {seed}: eval rotation {:.4} rad, median revolutions {:.3}",
                        e.mean_rotation, e.median_revolutions
                    );
                }
                println!("-> {}", a.metrics.display());
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
        } => {
            let a = exp::cmd_eval(&cfg, &checkpoint, episodes, &out)?;
            println!(
                "{} episodes: median revolutions {:.3}, mean rotation {:.4} rad",
                a.episodes.len(),
                a.summary.median_revolutions,
                a.summary.mean_rotation
            );
            println!("-> {}", a.episodes_path.display());
        }
        Command::Plot { kind, inputs } => {
            let kind: PlotKind = kind.parse()?;
            let target = if out.extension().is_some_and(|e| e == "svg") {
                out
            } else {
                out.join(format!("plot_{}.svg", format!("{kind:?}").to_lowercase()))
            };
            let groups = exp::cmd_plot(&inputs, kind, &target)?;
            println!("{} groups -> {}", groups.len(), target.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::HashMismatch { .. } | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
