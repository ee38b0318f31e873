//! Exploration trees over the grasp-constrained state space.

mod grrt;
mod metric;
mod mrrt;
mod tree;

pub use grrt::{grow_grrt, grrt_extend, Candidate};
pub use metric::{distance, sample_state, DistanceWeights, StateBounds};
pub use mrrt::{grow_mrrt, project_extension, projected_delta, resnap_contacts};
pub use tree::{ExplorationTree, PlannerKind, TreeNode, LINEAR_SCAN_LIMIT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Node budget, root included.
    pub n_max: usize,
    /// Hard cap on iterations; an iteration that adds no node still counts.
    pub max_iterations: usize,
    /// Action samples per G-RRT extension.
    pub k_max: usize,
    /// M-RRT step length in state coordinates.
    pub alpha: f64,
    /// Sampling box; `None` means [`StateBounds::around`] the root.
    pub bounds: Option<StateBounds>,
    pub weights: DistanceWeights,
    /// Fingers closer than this are pulled back onto the surface (m).
    pub resnap_threshold: f64,
    /// Half-width of the uniform setpoint perturbation per joint (rad).
    pub action_delta: f64,
    /// G-RRT outcomes touching the object with fewer fingers are rejected
    /// along with those that fail the rollout check.
    pub min_contacts: usize,
    /// Coverage is recorded every this many iterations.
    pub coverage_every: usize,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_max: 2000,
            max_iterations: 20_000,
            k_max: 64,
            alpha: 0.05,
            bounds: None,
            weights: DistanceWeights::default(),
            resnap_threshold: 0.005,
            action_delta: 0.15,
            min_contacts: 3,
            coverage_every: 100,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("planner.{m}")));
        if self.n_max < 1 {
            return bad("n_max must be at least 1");
        }
        if self.k_max < 1 {
            return bad("k_max must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        let w = &self.weights;
        if !(w.joint > 0.0 && w.position > 0.0 && w.angle > 0.0) {
            return bad("distance weights must be positive");
        }
        if !(self.resnap_threshold >= 0.0) {
            return bad("resnap_threshold must be non-negative");
        }
        if !(self.action_delta > 0.0) {
            return bad("action_delta must be positive");
        }
        if self.coverage_every == 0 {
            return bad("coverage_every must be at least 1");
        }
        Ok(())
    }
}

/// One row of a coverage curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoveragePoint {
    pub iteration: usize,
    pub nodes: usize,
    pub max_rotation: f64,
}

/// A grown tree with its coverage curve.
#[derive(Clone, Debug)]
pub struct PlanOutput {
    pub tree: ExplorationTree,
    pub coverage: Vec<CoveragePoint>,
    pub iterations: usize,
}

pub(crate) struct CoverageLog {
    every: usize,
    points: Vec<CoveragePoint>,
}

impl CoverageLog {
    pub(crate) fn new(every: usize) -> Self {
        Self {
            every,
            points: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, iteration: usize, tree: &ExplorationTree, last: bool) {
        let due = iteration % self.every == 0;
        let fresh = self.points.last().map_or(true, |p| p.iteration != iteration);
        if (due || last) && fresh {
            self.points.push(CoveragePoint {
                iteration,
                nodes: tree.len(),
                max_rotation: tree.max_rotation(),
            });
        }
    }

    pub(crate) fn finish(self) -> Vec<CoveragePoint> {
        self.points
    }
}

/// Coverage curve as CSV with a `# key value` comment preamble.
pub fn coverage_csv(points: &[CoveragePoint], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k} {v}\n"));
    }
    out.push_str("iteration,nodes,max_rotation\n");
    for p in points {
        out.push_str(&format!("{},{},{:?}\n", p.iteration, p.nodes, p.max_rotation));
    }
    out
}
