//! Batch experiment commands. Each command reads an [`ExperimentConfig`],
//! writes its artifacts under an output directory and returns their paths.
//! Every artifact carries the config hash and the seed in its header.

pub mod config;
pub mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::{ExperimentConfig, ResetKind, ENV_PREFIX};
pub use plot::{band, render_svg, BandPoint, Group, Table};

use crate::error::{Error, Result};
use crate::hand::Pose2;
use crate::planner::{coverage_csv, grow_grrt, grow_mrrt, PlanOutput, PlannerKind, StateBounds};
use crate::resets::{build_reset_set, sha256_hex, ExtractReport, ResetSet};
use crate::rl::{
    eval_starts, evaluate, summarize, Checkpoint, EvalEpisode, EvalRecord, ExploredBuffer,
    ResetDistribution, Trainer, UpdateRecord,
};
use crate::sim::{SimState, Simulator};

impl ExperimentConfig {
    pub fn simulator(&self) -> Result<Simulator> {
        Simulator::new(self.hand.clone(), self.object.clone(), self.sim.clone())
    }

    /// The settled canonical grasp every command starts from.
    pub fn initial_state(&self, sim: &Simulator) -> Result<SimState> {
        sim.canonical_grasp(self.grasp_squeeze, self.grasp_settle)
    }

    fn header(&self, seed: u64) -> Vec<(String, String)> {
        vec![
            ("config_sha256".into(), self.hash()),
            ("seed".into(), seed.to_string()),
            ("object".into(), self.object.name().to_string()),
        ]
    }
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn csv_preamble(meta: &[(String, String)]) -> String {
    meta.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "# {k} {v}");
        s
    })
}

#[derive(Clone, Debug)]
pub struct PlanArtifacts {
    pub tree: PathBuf,
    pub coverage: PathBuf,
    pub output: PlanOutput,
}

/// Grows the configured planner from the canonical grasp and writes
/// `tree_<planner>_k<K>_s<seed>.txt` plus a matching `coverage_*.csv`.
pub fn cmd_plan(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<PlanArtifacts> {
    let sim = cfg.simulator()?;
    let root = cfg.initial_state(&sim)?;
    let mut bounds = StateBounds::around(&cfg.hand, Pose2::default());
    bounds.x = [-cfg.planner_box, cfg.planner_box];
    bounds.y = [-cfg.planner_box, cfg.planner_box];
    bounds.angle_window = cfg.planner_angle_window;
    let pc = crate::planner::PlannerConfig {
        bounds: Some(bounds),
        seed,
        ..cfg.planner.clone()
    };
    let mut output = match cfg.planner_kind {
        PlannerKind::Grrt => grow_grrt(&sim, &root, &pc)?,
        PlannerKind::Mrrt => grow_mrrt(&cfg.hand, &cfg.object, &root.state, &cfg.stability, &pc)?,
    };
    output.tree.meta.push(("config_sha256".into(), cfg.hash()));
    output.tree.meta.push(("object".into(), cfg.object.name().to_string()));

    let kind = cfg.planner_kind.as_str();
    let stem = format!("{kind}_k{}_s{seed}", pc.k_max);
    create_dir(out)?;
    let tree = out.join(format!("tree_{stem}.txt"));
    output.tree.save(&tree)?;
    let mut meta = cfg.header(seed);
    meta.push(("planner".into(), kind.into()));
    meta.push(("k_max".into(), pc.k_max.to_string()));
    meta.push(("condition".into(), format!("{kind} K={}", pc.k_max)));
    let coverage = out.join(format!("coverage_{stem}.csv"));
    fs::write(&coverage, coverage_csv(&output.coverage, &meta))?;
    Ok(PlanArtifacts {
        tree,
        coverage,
        output,
    })
}

#[derive(Clone, Debug)]
pub struct ExtractArtifacts {
    pub resets: PathBuf,
    pub summary_path: PathBuf,
    pub summary: String,
    pub set: ResetSet,
    pub report: ExtractReport,
}

pub fn extract_summary(set: &ResetSet, report: &ExtractReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tree_sha256 {}", set.tree_sha256);
    let _ = writeln!(s, "planner {}", set.planner.as_str());
    let _ = writeln!(s, "paths {}", report.paths.len());
    for (leaf, len, rot) in &report.paths {
        let _ = writeln!(s, "  leaf {leaf} length {len} rotation {rot:.6}");
    }
    let _ = writeln!(s, "union {}", report.union);
    let _ = writeln!(s, "dropped_contacts {}", report.dropped_contacts);
    let _ = writeln!(s, "dropped_rollout {}", report.dropped_rollout);
    let _ = writeln!(s, "states {}", set.len());
    s
}

/// Extracts a reset set from `tree_path` into `resets_<tree stem>.txt`
/// and writes the printed summary next to it.
pub fn cmd_extract(cfg: &ExperimentConfig, tree_path: &Path, out: &Path) -> Result<ExtractArtifacts> {
    let text = fs::read_to_string(tree_path)?;
    let tree = crate::planner::ExplorationTree::from_text(&text)?;
    let tree_meta = |k: &str| tree.meta.iter().find(|(m, _)| m == k).map(|(_, v)| v.clone());
    if let Some(name) = tree_meta("object") {
        if name != cfg.object.name() {
            return Err(Error::Config(format!(
                "tree was grown for object `{name}`, config selects `{}`",
                cfg.object.name()
            )));
        }
    }
    if tree.root().state.q.len() != cfg.hand.dof() {
        return Err(Error::Config("tree does not match the configured hand".into()));
    }
    let sim = cfg.simulator()?;
    let (mut set, report) = build_reset_set(&tree, &sim, &cfg.extract)?;
    debug_assert_eq!(set.tree_sha256, sha256_hex(text.as_bytes()));
    let seed: u64 = tree_meta("seed").and_then(|s| s.parse().ok()).unwrap_or(0);
    set.meta = cfg.header(seed);

    let stem = tree_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("tree")
        .trim_start_matches("tree_")
        .to_string();
    create_dir(out)?;
    let resets = out.join(format!("resets_{stem}.txt"));
    set.save(&resets)?;
    let summary = extract_summary(&set, &report);
    let summary_path = out.join(format!("extract_{stem}.txt"));
    fs::write(&summary_path, format!("{}{summary}", csv_preamble(&set.meta)))?;
    Ok(ExtractArtifacts {
        resets,
        summary_path,
        summary,
        set,
        report,
    })
}

/// Reset distribution for `cfg.reset`. Reset files must match the
/// configured object and hand; states failing the rollout check are
/// dropped with a warning.
pub fn reset_distribution(
    cfg: &ExperimentConfig,
    sim: &Simulator,
    initial: &SimState,
    resets: Option<&Path>,
) -> Result<ResetDistribution> {
    Ok(match cfg.reset {
        ResetKind::FixedInit => ResetDistribution::FixedInit(initial.clone()),
        ResetKind::StableGraspSampler => ResetDistribution::StableGraspSampler(cfg.sgs.clone()),
        ResetKind::ExploredRestarts => ResetDistribution::ExploredRestarts {
            initial: initial.clone(),
            buffer: ExploredBuffer::new(cfg.train.explored_capacity),
            initial_prob: cfg.train.explored_initial_prob,
        },
        ResetKind::TreeResets => {
            let path = resets.ok_or_else(|| {
                Error::Config("reset distribution `tree` needs a reset-set file".into())
            })?;
            let mut set = ResetSet::load(path).map_err(|e| match e {
                Error::Io(e) => Error::Config(format!("cannot read {}: {e}", path.display())),
                other => other,
            })?;
            if set.object != cfg.object.name() || set.fingers != cfg.hand.num_fingers() {
                return Err(Error::Config(format!(
                    "reset set is for object `{}` with {} fingers",
                    set.object, set.fingers
                )));
            }
            let bad = set.unstable(sim);
            if !bad.is_empty() {
                log::warn!("dropping {} reset states that fail the rollout check", bad.len());
                let mut i = 0;
                set.states.retain(|_| {
                    let keep = bad.binary_search(&i).is_err();
                    i += 1;
                    keep
                });
            }
            if set.is_empty() {
                return Err(Error::EmptyResetSet);
            }
            ResetDistribution::TreeResets(set)
        }
    })
}

pub const TRAIN_COLUMNS: &str = "update,env_steps,episodes,mean_reward,mean_rotation,mean_length,actor_loss,critic_loss,entropy,kl,clip_fraction,explained_variance";
pub const EVAL_COLUMNS: &str = "update,env_steps,mean_rotation,median_revolutions,mean_length";

pub fn train_row(r: &UpdateRecord) -> String {
    let s = &r.stats;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.update,
        r.env_steps,
        r.episodes,
        r.mean_reward,
        r.mean_rotation,
        r.mean_length,
        s.actor_loss,
        s.critic_loss,
        s.entropy,
        s.kl,
        s.clip_fraction,
        s.explained_variance
    )
}

pub fn eval_row(r: &EvalRecord) -> String {
    format!(
        "{},{},{},{},{}",
        r.update, r.env_steps, r.mean_rotation, r.median_revolutions, r.mean_length
    )
}

#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub metrics: PathBuf,
    pub eval: PathBuf,
    pub checkpoint: PathBuf,
    pub final_eval: Option<EvalRecord>,
}

/// Trains one seed and writes `train_<reset>_s<seed>.csv`, the periodic
/// evaluations in `eval_<reset>_s<seed>.csv` and the final policy in
/// `policy_<reset>_s<seed>.json`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    seed: u64,
    resets: Option<&Path>,
    out: &Path,
) -> Result<TrainArtifacts> {
    let sim = cfg.simulator()?;
    let initial = cfg.initial_state(&sim)?;
    let dist = reset_distribution(cfg, &sim, &initial, resets)?;
    let tc = crate::rl::TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let mut meta = cfg.header(seed);
    meta.push(("reset".into(), cfg.reset.as_str().into()));
    meta.push(("condition".into(), cfg.reset.as_str().into()));

    create_dir(out)?;
    let stem = format!("{}_s{seed}", cfg.reset.as_str());
    let metrics = out.join(format!("train_{stem}.csv"));
    let eval = out.join(format!("eval_{stem}.csv"));
    let checkpoint = out.join(format!("policy_{stem}.json"));
    let mut train_csv = format!("{}{TRAIN_COLUMNS}\n", csv_preamble(&meta));
    let mut eval_csv = format!("{}{EVAL_COLUMNS}\n", csv_preamble(&meta));

    let updates = tc.updates;
    let mut trainer = Trainer::new(sim, tc, dist, initial)?;
    let mut final_eval = None;
    for _ in 0..updates {
        let r = trainer.step()?;
        log::info!(
            "update {} steps {} reward {:.3} rotation {:.3}",
            r.update,
            r.env_steps,
            r.mean_reward,
            r.mean_rotation
        );
        let _ = writeln!(train_csv, "{}", train_row(&r));
        if trainer.eval_due() {
            let e = summarize(trainer.update, trainer.env_steps, &trainer.evaluate()?);
            let _ = writeln!(eval_csv, "{}", eval_row(&e));
            final_eval = Some(e);
        }
    }
    fs::write(&metrics, train_csv)?;
    fs::write(&eval, eval_csv)?;
    trainer.checkpoint(&cfg.hash()).save(&checkpoint)?;
    Ok(TrainArtifacts {
        metrics,
        eval,
        checkpoint,
        final_eval,
    })
}

pub const EPISODE_COLUMNS: &str = "episode,rotation,revolutions,length,mean_speed,end";

#[derive(Clone, Debug)]
pub struct EvalArtifacts {
    pub episodes_path: PathBuf,
    pub episodes: Vec<EvalEpisode>,
    pub summary: EvalRecord,
}

/// Runs `episodes` deterministic episodes of a checkpoint trained under
/// the same config and writes `episodes_<checkpoint stem>.csv`.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    episodes: usize,
    out: &Path,
) -> Result<EvalArtifacts> {
    let ck = Checkpoint::load(checkpoint)?;
    ck.expect_config(&cfg.hash())?;
    let sim = cfg.simulator()?;
    if ck.params.action_dim() != cfg.hand.dof() {
        return Err(Error::Config("checkpoint does not match the configured hand".into()));
    }
    let initial = cfg.initial_state(&sim)?;
    let starts = eval_starts(&sim, &initial, episodes, cfg.train.eval_noise, ck.seed);
    let eps = evaluate(&ck.params, &sim, &cfg.train.reward, &starts)?;
    let summary = summarize(ck.update, 0, &eps);
    let mean_speed = if eps.is_empty() {
        f64::NAN
    } else {
        eps.iter().map(|e| e.mean_speed).sum::<f64>() / eps.len() as f64
    };

    let mut meta = cfg.header(ck.seed);
    meta.push(("update".into(), ck.update.to_string()));
    meta.push(("episodes".into(), episodes.to_string()));
    meta.push(("median_revolutions".into(), summary.median_revolutions.to_string()));
    meta.push(("mean_speed".into(), mean_speed.to_string()));
    let mut csv = format!("{}{EPISODE_COLUMNS}\n", csv_preamble(&meta));
    for (i, e) in eps.iter().enumerate() {
        let end = match e.end {
            crate::rl::Termination::Contacts => 0,
            crate::rl::Termination::Dropped => 1,
            crate::rl::Termination::Horizon => 2,
        };
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{end}",
            e.rotation, e.revolutions, e.length, e.mean_speed
        );
    }
    create_dir(out)?;
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("policy");
    let episodes_path = out.join(format!("episodes_{stem}.csv"));
    fs::write(&episodes_path, csv)?;
    Ok(EvalArtifacts {
        episodes_path,
        episodes: eps,
        summary,
    })
}

/// Which columns a plot draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Coverage CSVs: max rotation against planner iteration.
    Coverage,
    /// Training CSVs: mean episode rotation against environment steps.
    Train,
    /// Evaluation CSVs: mean evaluation rotation against environment steps.
    Eval,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(Self::Coverage),
            "train" => Ok(Self::Train),
            "eval" => Ok(Self::Eval),
            other => Err(Error::Config(format!(
                "unknown plot kind `{other}` (coverage | train | eval)"
            ))),
        }
    }
}

impl PlotKind {
    pub fn columns(&self) -> (&'static str, &'static str) {
        match self {
            Self::Coverage => ("iteration", "max_rotation"),
            Self::Train | Self::Eval => ("env_steps", "mean_rotation"),
        }
    }

    fn labels(&self) -> (&'static str, &'static str, &'static str) {
        match self {
            Self::Coverage => ("Exploration coverage", "planner iteration", "max rotation (rad)"),
            Self::Train => ("Training episodes", "environment steps", "mean episode rotation (rad)"),
            Self::Eval => ("Evaluation", "environment steps", "mean evaluation rotation (rad)"),
        }
    }
}

/// Groups the series of `inputs` by their `# condition` comment (file
/// name when absent), in first-seen order.
pub fn load_groups(inputs: &[PathBuf], kind: PlotKind) -> Result<Vec<Group>> {
    let (x, y) = kind.columns();
    let mut groups: Vec<Group> = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path)?;
        let table = Table::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        let label = table
            .meta("condition")
            .map(str::to_string)
            .unwrap_or_else(|| path.display().to_string());
        let series = table.series(x, y)?;
        match groups.iter_mut().find(|g| g.label == label) {
            Some(g) => g.runs.push(series),
            None => groups.push(Group {
                label,
                runs: vec![series],
            }),
        }
    }
    Ok(groups)
}

/// Renders the CSV files to a standalone SVG at `out`.
pub fn cmd_plot(inputs: &[PathBuf], kind: PlotKind, out: &Path) -> Result<Vec<Group>> {
    if inputs.is_empty() {
        return Err(Error::Config("plot needs at least one CSV file".into()));
    }
    let groups = load_groups(inputs, kind)?;
    let (title, xl, yl) = kind.labels();
    let svg = render_svg(&groups, title, xl, yl)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(out, svg)?;
    Ok(groups)
}
