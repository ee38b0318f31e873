//! General-purpose RRT: extensions are sampled actions pushed through the
//! simulator and kept only if the result survives a hold-still rollout.

use rayon::prelude::*;
use rand::Rng;

use super::metric::{distance, sample_state, StateBounds};
use super::tree::{ExplorationTree, PlannerKind, TreeNode};
use super::{CoverageLog, PlanOutput, PlannerConfig};
use crate::error::{Error, Result};
use crate::hand::State;
use crate::rng::{stream, TAG_ACTION, TAG_STATE_SAMPLE};
use crate::sim::{Action, SimState, Simulator};

/// Outcome of one extension.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub state: SimState,
    pub action: Vec<f64>,
    /// Index of the winning action sample.
    pub sample: usize,
    pub distance: f64,
}

/// The `k`-th action of extension `iteration`: uniform setpoint deltas
/// around the node's joint positions. Each action has its own stream, so
/// the first `K` actions are the same for every `K_max >= K`.
fn sample_action(seed: u64, iteration: usize, k: usize, q: &[f64], delta: f64) -> Vec<f64> {
    let mut rng = stream(seed, &[TAG_ACTION, iteration as u64, k as u64]);
    q.iter().map(|q| q + rng.gen_range(-delta..=delta)).collect()
}

/// Tries `cfg.k_max` actions from `node` and returns the outcome closest to
/// `sample` that keeps `cfg.min_contacts` fingers on the object and passes
/// the rollout check, or `None` if there is no such outcome.
/// Candidates are simulated in parallel and reduced by
/// `(distance, action index)`, so the result does not depend on the
/// evaluation order.
pub fn grrt_extend(
    sim: &Simulator,
    node: &SimState,
    sample: &State,
    cfg: &PlannerConfig,
    iteration: usize,
) -> Option<Candidate> {
    let mut outcomes: Vec<(f64, usize, SimState, Vec<f64>)> = (0..cfg.k_max)
        .into_par_iter()
        .filter_map(|k| {
            let sim = sim.instance();
            let action = sample_action(cfg.seed, iteration, k, &node.state.q, cfg.action_delta);
            let mut s = node.clone();
            sim.control(&mut s, &Action(action)).ok()?;
            if !s.is_finite() || sim.is_dropped(&s) || sim.contacts(&s.state).count() < cfg.min_contacts {
                return None;
            }
            let d = distance(&s.state, sample, &cfg.weights);
            let applied = s.setpoints.clone();
            Some((d, k, s, applied))
        })
        .collect();
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // Checking in distance order and stopping at the first stable outcome
    // gives the same answer as checking all of them.
    outcomes
        .into_iter()
        .find(|(_, _, s, _)| sim.rollout_stability_check(s))
        .map(|(distance, sample, state, action)| Candidate {
            state,
            action,
            sample,
            distance,
        })
}

pub fn grow_grrt(sim: &Simulator, root: &SimState, cfg: &PlannerConfig) -> Result<PlanOutput> {
    cfg.validate()?;
    let model = sim.model();
    if root.state.q.len() != model.dof() || root.setpoints.len() != model.dof() {
        return Err(Error::Dimension {
            what: "root joints",
            expected: model.dof(),
            actual: root.state.q.len(),
        });
    }
    if !sim.rollout_stability_check(root) || sim.contacts(&root.state).count() < cfg.min_contacts {
        return Err(Error::Setup("G-RRT root drops the object".into()));
    }
    let bounds = cfg
        .bounds
        .clone()
        .unwrap_or_else(|| StateBounds::around(model, root.state.pose));
    let root_node = TreeNode {
        id: 0,
        parent: None,
        state: root.state.clone(),
        action: Some(root.setpoints.clone()),
        velocity: Some(root.velocity),
        rotation: 0.0,
        edge_residual: None,
    };
    let mut tree = ExplorationTree::new(PlannerKind::Grrt, cfg.weights, root_node);
    let mut rng = stream(cfg.seed, &[TAG_STATE_SAMPLE]);
    let mut log = CoverageLog::new(cfg.coverage_every);
    log.record(0, &tree, false);
    let mut iteration = 0;
    while tree.len() < cfg.n_max && iteration < cfg.max_iterations {
        iteration += 1;
        let growth = tree.len() as f64 / cfg.n_max as f64;
        let sample = sample_state(&bounds, root.state.pose.theta, growth, &mut rng);
        let node = tree.nearest(&sample);
        let (parent, from) = (node.id, node.sim_state());
        if let Some(c) = grrt_extend(sim, &from, &sample, cfg, iteration) {
            tree.add(parent, c.state.state, Some(c.action), Some(c.state.velocity), None);
        }
        log.record(iteration, &tree, false);
    }
    log.record(iteration, &tree, true);
    tree.meta.push(("seed".into(), cfg.seed.to_string()));
    tree.meta.push(("k_max".into(), cfg.k_max.to_string()));
    Ok(PlanOutput {
        tree,
        coverage: log.finish(),
        iterations: iteration,
    })
}
