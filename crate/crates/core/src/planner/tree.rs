use std::fmt::Write as _;

use super::metric::{distance, DistanceWeights};
use crate::error::{Error, Result};
use crate::hand::State;
use crate::sim::{join_floats, parse_floats, SimState};

/// Which planner grew a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlannerKind {
    /// Constraint projection, no transition function.
    Mrrt,
    /// Sampled actions through the simulator.
    Grrt,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mrrt => "mrrt",
            Self::Grrt => "grrt",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mrrt" => Ok(Self::Mrrt),
            "grrt" => Ok(Self::Grrt),
            other => Err(Error::Config(format!("unknown planner `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub state: State,
    /// Servo setpoints held at this node (G-RRT only; for non-root nodes
    /// this is the action that produced the node).
    pub action: Option<Vec<f64>>,
    /// Object twist at this node (G-RRT only).
    pub velocity: Option<[f64; 3]>,
    /// Object angle relative to the root, unwrapped.
    pub rotation: f64,
    /// `||N (x_child - x_parent)||` before re-snapping (M-RRT only, not
    /// serialized).
    pub edge_residual: Option<f64>,
}

impl TreeNode {
    /// Simulator state for this node. Nodes without stored setpoints hold
    /// their joint positions at rest.
    pub fn sim_state(&self) -> SimState {
        match (&self.action, self.velocity) {
            (Some(a), v) => SimState {
                state: self.state.clone(),
                velocity: v.unwrap_or([0.0; 3]),
                setpoints: a.clone(),
            },
            (None, _) => SimState::at_rest(self.state.clone()),
        }
    }
}

/// Insert-only k-d tree over weighted state coordinates. Candidate nodes
/// are always compared with the exact metric, so results agree with a
/// linear scan.
#[derive(Clone, Debug, Default)]
struct KdIndex {
    /// (node id, left, right, split axis)
    cells: Vec<(usize, Option<usize>, Option<usize>, usize)>,
    coords: Vec<Vec<f64>>,
}

impl KdIndex {
    fn embed(state: &State, w: &DistanceWeights) -> Vec<f64> {
        let mut v: Vec<f64> = state.q.iter().map(|q| q * w.joint).collect();
        v.push(state.pose.x * w.position);
        v.push(state.pose.y * w.position);
        v.push(state.pose.theta * w.angle);
        v
    }

    fn insert(&mut self, id: usize, state: &State, w: &DistanceWeights) {
        let p = Self::embed(state, w);
        let dims = p.len();
        let cell = self.cells.len();
        if cell == 0 {
            self.cells.push((id, None, None, 0));
            self.coords.push(p);
            return;
        }
        let mut at = 0;
        loop {
            let (_, left, right, axis) = self.cells[at];
            let go_left = p[axis] < self.coords[at][axis];
            let next = if go_left { left } else { right };
            match next {
                Some(n) => at = n,
                None => {
                    let depth_axis = (axis + 1) % dims;
                    self.cells.push((id, None, None, depth_axis));
                    self.coords.push(p);
                    if go_left {
                        self.cells[at].1 = Some(cell);
                    } else {
                        self.cells[at].2 = Some(cell);
                    }
                    return;
                }
            }
        }
    }

    fn nearest(&self, nodes: &[TreeNode], target: &State, w: &DistanceWeights) -> (f64, usize) {
        let p = Self::embed(target, w);
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            let (id, left, right, axis) = self.cells[at];
            let d = distance(&nodes[id].state, target, w);
            if (d, id) < best {
                best = (d, id);
            }
            let diff = p[axis] - self.coords[at][axis];
            let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
            // Slack guards against rounding in the embedded coordinates.
            if let Some(f) = far {
                if diff.abs() <= best.0 * (1.0 + 1e-9) + 1e-12 {
                    stack.push(f);
                }
            }
            if let Some(n) = near {
                stack.push(n);
            }
        }
        best
    }
}

struct Cursor<'a> {
    tok: &'a [&'a str],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [&'a str]> {
        let s = self.tok.get(self.at..self.at + n)?;
        self.at += n;
        Some(s)
    }

    /// `n` fields or a single `-` sentinel.
    fn optional(&mut self, n: usize) -> Option<Option<&'a [&'a str]>> {
        if self.tok.get(self.at) == Some(&"-") {
            self.at += 1;
            Some(None)
        } else {
            self.take(n).map(Some)
        }
    }
}

/// Above this many nodes the k-d index answers nearest-neighbour queries.
pub const LINEAR_SCAN_LIMIT: usize = 10_000;

/// Parent-linked exploration tree with a nearest-neighbour index.
#[derive(Clone, Debug)]
pub struct ExplorationTree {
    kind: PlannerKind,
    weights: DistanceWeights,
    nodes: Vec<TreeNode>,
    child_count: Vec<usize>,
    index: KdIndex,
    max_rotation: f64,
    /// Free-form `key value` metadata written to the file header.
    pub meta: Vec<(String, String)>,
}

impl ExplorationTree {
    pub fn new(kind: PlannerKind, weights: DistanceWeights, root: TreeNode) -> Self {
        let mut t = Self {
            kind,
            weights,
            nodes: Vec::new(),
            child_count: Vec::new(),
            index: KdIndex::default(),
            max_rotation: 0.0,
            meta: Vec::new(),
        };
        t.push(TreeNode {
            id: 0,
            parent: None,
            rotation: 0.0,
            ..root
        });
        t
    }

    fn push(&mut self, node: TreeNode) {
        self.index.insert(node.id, &node.state, &self.weights);
        self.max_rotation = self.max_rotation.max(node.rotation.abs());
        if let Some(p) = node.parent {
            self.child_count[p] += 1;
        }
        self.child_count.push(0);
        self.nodes.push(node);
    }

    /// Adds a child of `parent`; returns its id.
    pub fn add(
        &mut self,
        parent: usize,
        state: State,
        action: Option<Vec<f64>>,
        velocity: Option<[f64; 3]>,
        edge_residual: Option<f64>,
    ) -> usize {
        let id = self.nodes.len();
        let rotation = state.pose.theta - self.nodes[0].state.pose.theta;
        self.push(TreeNode {
            id,
            parent: Some(parent),
            state,
            action,
            velocity,
            rotation,
            edge_residual,
        });
        id
    }

    pub fn kind(&self) -> PlannerKind {
        self.kind
    }

    pub fn weights(&self) -> &DistanceWeights {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.child_count[id] == 0
    }

    /// Largest `|rotation|` over all nodes.
    pub fn max_rotation(&self) -> f64 {
        self.max_rotation
    }

    /// Node minimising the metric to `target`; ties go to the lowest id.
    pub fn nearest(&self, target: &State) -> &TreeNode {
        if self.nodes.len() <= LINEAR_SCAN_LIMIT {
            &self.nodes[self.nearest_linear(target)]
        } else {
            let (_, id) = self.index.nearest(&self.nodes, target, &self.weights);
            &self.nodes[id]
        }
    }

    /// Brute-force nearest neighbour.
    pub fn nearest_linear(&self, target: &State) -> usize {
        let mut best = (f64::INFINITY, 0);
        for n in &self.nodes {
            let d = distance(&n.state, target, &self.weights);
            if d < best.0 {
                best = (d, n.id);
            }
        }
        best.1
    }

    /// Nearest neighbour through the k-d index regardless of tree size.
    pub fn nearest_indexed(&self, target: &State) -> usize {
        self.index.nearest(&self.nodes, target, &self.weights).1
    }

    /// Node ids from the root to `id`, inclusive.
    pub fn path_to(&self, id: usize) -> Result<Vec<usize>> {
        let mut path = vec![self.node(id)?.id];
        let mut at = id;
        while let Some(p) = self.nodes[at].parent {
            path.push(p);
            at = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Serializes to the line-oriented tree format.
    ///
    /// ```text
    /// # dexplore-tree 1
    /// # planner <mrrt|grrt>
    /// # dof <d>
    /// # weights <joint> <position> <angle>
    /// # meta <key> <value>          (zero or more)
    /// <id> <parent|-> <q_1..q_d x y theta> <setpoints_1..d|-> <vx vy omega|-> <rotation>
    /// ```
    pub fn to_text(&self) -> String {
        let d = self.nodes[0].state.q.len();
        let mut out = String::new();
        let w = &self.weights;
        let _ = writeln!(out, "# dexplore-tree 1");
        let _ = writeln!(out, "# planner {}", self.kind.as_str());
        let _ = writeln!(out, "# dof {d}");
        let _ = writeln!(out, "# weights {:?} {:?} {:?}", w.joint, w.position, w.angle);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# meta {k} {v}");
        }
        for n in &self.nodes {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let action = n.action.as_deref().map_or("-".to_string(), join_floats);
            let vel = n.velocity.map_or("-".to_string(), |v| join_floats(&v));
            let _ = writeln!(
                out,
                "{} {} {} {} {} {:?}",
                n.id,
                parent,
                join_floats(&n.state.to_vec()),
                action,
                vel,
                n.rotation
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut dof = None;
        let mut weights = None;
        let mut meta = Vec::new();
        let mut nodes: Vec<TreeNode> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let perr = |msg: String| Error::Parse { line: lineno, msg };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let mut parts = h.split_whitespace();
                match parts.next() {
                    Some("planner") => kind = Some(parts.next().unwrap_or("").parse()?),
                    Some("dof") => {
                        dof = Some(
                            parts
                                .next()
                                .and_then(|t| t.parse::<usize>().ok())
                                .ok_or_else(|| perr("bad dof".into()))?,
                        )
                    }
                    Some("weights") => {
                        let v = parse_floats(&parts.collect::<Vec<_>>().join(" "), lineno)?;
                        if v.len() != 3 {
                            return Err(perr("weights need 3 values".into()));
                        }
                        weights = Some(DistanceWeights {
                            joint: v[0],
                            position: v[1],
                            angle: v[2],
                        });
                    }
                    Some("meta") => {
                        let k = parts.next().unwrap_or("").to_string();
                        meta.push((k, parts.collect::<Vec<_>>().join(" ")));
                    }
                    _ => {}
                }
                continue;
            }
            let d = dof.ok_or_else(|| perr("node record before `# dof` header".into()))?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            let mut cur = Cursor { tok: &tok, at: 0 };
            let truncated = || perr("truncated node record".into());
            let id: usize = cur
                .take(1)
                .ok_or_else(truncated)?[0]
                .parse()
                .map_err(|_| perr("bad node id".into()))?;
            let parent = match cur.take(1).ok_or_else(truncated)?[0] {
                "-" => None,
                t => Some(t.parse::<usize>().map_err(|_| perr("bad parent id".into()))?),
            };
            let state = State::from_slice(
                d,
                &parse_floats(&cur.take(d + 3).ok_or_else(truncated)?.join(" "), lineno)?,
            )?;
            let action = match cur.optional(d) {
                Some(Some(t)) => Some(parse_floats(&t.join(" "), lineno)?),
                Some(None) => None,
                None => return Err(truncated()),
            };
            let velocity = match cur.optional(3) {
                Some(Some(t)) => {
                    let v = parse_floats(&t.join(" "), lineno)?;
                    Some([v[0], v[1], v[2]])
                }
                Some(None) => None,
                None => return Err(truncated()),
            };
            let rotation = parse_floats(cur.take(1).ok_or_else(truncated)?[0], lineno)?[0];
            if cur.at != tok.len() {
                return Err(perr("trailing fields in node record".into()));
            }
            if id != nodes.len() {
                return Err(perr(format!("expected node id {}, got {id}", nodes.len())));
            }
            match parent {
                None if id != 0 => return Err(perr("only the root may lack a parent".into())),
                Some(p) if p >= id => return Err(perr("parent must precede child".into())),
                _ => {}
            }
            nodes.push(TreeNode {
                id,
                parent,
                state,
                action,
                velocity,
                rotation,
                edge_residual: None,
            });
        }
        let kind = kind.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing `# planner` header".into(),
        })?;
        let weights = weights.unwrap_or_default();
        let mut it = nodes.into_iter();
        let root = it.next().ok_or(Error::Parse {
            line: 0,
            msg: "tree has no nodes".into(),
        })?;
        let mut tree = Self::new(kind, weights, root);
        tree.meta = meta;
        for n in it {
            tree.push(n);
        }
        Ok(tree)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
