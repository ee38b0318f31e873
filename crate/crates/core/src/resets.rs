//! Reset distributions extracted from exploration trees.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hand::{place_fingertip, State};
use crate::planner::{ExplorationTree, PlannerKind};
use crate::sim::{parse_floats, SimState, Simulator};

/// `|theta(id) - theta(root)|` along the tree path to `id`.
pub fn path_rotation(tree: &ExplorationTree, id: usize) -> Result<f64> {
    let node = tree.node(id)?;
    Ok((node.state.pose.theta - tree.root().state.pose.theta).abs())
}

/// The `k` root-to-leaf paths with the largest rotation, best first; ties
/// go to the lower leaf id.
pub fn top_k_paths(tree: &ExplorationTree, k: usize) -> Vec<Vec<usize>> {
    let mut leaves: Vec<(f64, usize)> = tree
        .nodes()
        .iter()
        .filter(|n| tree.is_leaf(n.id))
        .map(|n| (path_rotation(tree, n.id).unwrap_or(0.0), n.id))
        .collect();
    if leaves.len() < k {
        log::info!("tree has {} leaves, fewer than the {k} paths requested", leaves.len());
    }
    leaves.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    leaves
        .into_iter()
        .take(k)
        .map(|(_, id)| tree.path_to(id).expect("leaf exists"))
        .collect()
}

/// Knobs for [`build_reset_set`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractConfig {
    /// Number of top paths.
    pub k: usize,
    /// Node cap on the union of the paths.
    pub cap: usize,
    /// Servo setpoints for M-RRT states are placed this far inside the
    /// surface so the fingers actually press (m).
    pub squeeze: f64,
    pub min_contacts: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            k: 10,
            cap: 2000,
            squeeze: 0.002,
            min_contacts: 3,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.cap == 0 {
            return Err(Error::Config("extract.k and extract.cap must be at least 1".into()));
        }
        if !(self.squeeze >= 0.0) {
            return Err(Error::Config("extract.squeeze must be non-negative".into()));
        }
        Ok(())
    }
}

/// Simulator state for a planner state that carries no setpoints: zero
/// velocity, touching fingers commanded `squeeze` meters into the object,
/// free fingers holding their joints.
pub fn complete_state(sim: &Simulator, state: &State, squeeze: f64) -> SimState {
    let mut s = SimState::at_rest(state.clone());
    let model = sim.model();
    for c in sim.contacts(state).active() {
        if let Some([a, b]) = place_fingertip(model, sim.shape(), state, c.finger, -squeeze, 1e-7, 100) {
            let r = model.joint_range(c.finger);
            s.setpoints[r.start] = a;
            s.setpoints[r.start + 1] = b;
        }
    }
    model.clamp_joints(&mut s.setpoints);
    s
}

/// A filtered set of start states with the provenance of the tree it came
/// from.
#[derive(Clone, Debug, PartialEq)]
pub struct ResetSet {
    pub states: Vec<SimState>,
    /// SHA-256 of the serialized tree.
    pub tree_sha256: String,
    pub planner: PlannerKind,
    pub object: String,
    pub fingers: usize,
    pub k: usize,
    pub cap: usize,
    /// Leaf ids of the selected paths, best first.
    pub leaves: Vec<usize>,
    /// Free-form `key value` metadata written to the file header.
    pub meta: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Summary of an extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractReport {
    /// `(leaf id, path length, rotation)` per selected path.
    pub paths: Vec<(usize, usize, f64)>,
    pub union: usize,
    pub checked: usize,
    pub dropped_contacts: usize,
    pub dropped_rollout: usize,
}

/// Union of the top `k` paths, truncated to `cap` nodes in path order.
/// States with too few contacts are dropped; M-RRT states are also
/// completed to simulator states and must pass the rollout check, while
/// G-RRT states were checked when they were added and pass through.
pub fn build_reset_set(
    tree: &ExplorationTree,
    sim: &Simulator,
    cfg: &ExtractConfig,
) -> Result<(ResetSet, ExtractReport)> {
    cfg.validate()?;
    let paths = top_k_paths(tree, cfg.k);
    let mut seen = vec![false; tree.len()];
    let mut ids = Vec::new();
    for p in &paths {
        for &id in p {
            if !seen[id] {
                seen[id] = true;
                ids.push(id);
            }
        }
    }
    let union = ids.len();
    ids.truncate(cfg.cap);
    let mut dropped_contacts = 0;
    let candidates: Vec<SimState> = ids
        .iter()
        .filter_map(|&id| {
            let n = &tree.nodes()[id];
            if sim.contacts(&n.state).count() < cfg.min_contacts {
                dropped_contacts += 1;
                return None;
            }
            Some(match tree.kind() {
                PlannerKind::Grrt => n.sim_state(),
                PlannerKind::Mrrt => complete_state(sim, &n.state, cfg.squeeze),
            })
        })
        .collect();
    let checked = if tree.kind() == PlannerKind::Mrrt { candidates.len() } else { 0 };
    let states: Vec<SimState> = match tree.kind() {
        PlannerKind::Grrt => candidates,
        PlannerKind::Mrrt => {
            let keep: Vec<bool> = candidates
                .par_iter()
                .map(|s| sim.instance().rollout_stability_check(s))
                .collect();
            candidates
                .into_iter()
                .zip(keep)
                .filter_map(|(s, k)| k.then_some(s))
                .collect()
        }
    };
    let dropped_rollout = checked.saturating_sub(states.len());
    if states.is_empty() {
        return Err(Error::EmptyResetSet);
    }
    let report = ExtractReport {
        paths: paths
            .iter()
            .map(|p| {
                let leaf = *p.last().expect("paths are non-empty");
                (leaf, p.len(), path_rotation(tree, leaf).unwrap_or(0.0))
            })
            .collect(),
        union,
        checked,
        dropped_contacts,
        dropped_rollout,
    };
    let set = ResetSet {
        states,
        tree_sha256: sha256_hex(tree.to_text().as_bytes()),
        planner: tree.kind(),
        object: sim.shape().name().to_string(),
        fingers: sim.model().num_fingers(),
        k: cfg.k,
        cap: cfg.cap,
        leaves: report.paths.iter().map(|p| p.0).collect(),
        meta: Vec::new(),
    };
    Ok((set, report))
}

impl ResetSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &SimState {
        &self.states[rng.gen_range(0..self.states.len())]
    }

    /// Indices of states that fail the rollout check.
    pub fn unstable(&self, sim: &Simulator) -> Vec<usize> {
        self.states
            .par_iter()
            .enumerate()
            .filter(|(_, s)| !sim.instance().rollout_stability_check(s))
            .map(|(i, _)| i)
            .collect()
    }

    /// ```text
    /// # dexplore-resets 1
    /// # tree_sha256 <hex>
    /// # planner <mrrt|grrt>
    /// # object <name>
    /// # fingers <m>
    /// # k <k>
    /// # cap <cap>
    /// # leaves <id> <id> ...
    /// # meta <key> <value>          (zero or more)
    /// <q x y theta vx vy omega setpoints>     (one per state)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dexplore-resets 1");
        let _ = writeln!(out, "# tree_sha256 {}", self.tree_sha256);
        let _ = writeln!(out, "# planner {}", self.planner.as_str());
        let _ = writeln!(out, "# object {}", self.object);
        let _ = writeln!(out, "# fingers {}", self.fingers);
        let _ = writeln!(out, "# k {}", self.k);
        let _ = writeln!(out, "# cap {}", self.cap);
        let leaves: Vec<String> = self.leaves.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "# leaves {}", leaves.join(" "));
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# meta {k} {v}");
        }
        for s in &self.states {
            let _ = writeln!(out, "{}", s.to_record());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut set = ResetSet {
            states: Vec::new(),
            tree_sha256: String::new(),
            planner: PlannerKind::Grrt,
            object: String::new(),
            fingers: 0,
            k: 0,
            cap: 0,
            leaves: Vec::new(),
            meta: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let perr = |msg: &str| Error::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                let (key, value) = h.split_once(' ').unwrap_or((h, ""));
                let int = |v: &str| v.parse::<usize>().map_err(|_| perr("bad integer"));
                match key {
                    "tree_sha256" => set.tree_sha256 = value.to_string(),
                    "planner" => set.planner = value.parse()?,
                    "object" => set.object = value.to_string(),
                    "fingers" => set.fingers = int(value)?,
                    "k" => set.k = int(value)?,
                    "cap" => set.cap = int(value)?,
                    "leaves" => {
                        set.leaves = value
                            .split_whitespace()
                            .map(int)
                            .collect::<Result<_>>()?
                    }
                    "meta" => {
                        let (k, v) = value.split_once(' ').unwrap_or((value, ""));
                        set.meta.push((k.to_string(), v.to_string()));
                    }
                    _ => {}
                }
                continue;
            }
            if set.fingers == 0 {
                return Err(perr("state record before `# fingers` header"));
            }
            let dof = 2 * set.fingers;
            let v = parse_floats(line, lineno)?;
            let s = SimState::from_slice(dof, &v).map_err(|e| perr(&e.to_string()))?;
            set.states.push(s);
        }
        if set.states.is_empty() {
            return Err(Error::EmptyResetSet);
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
