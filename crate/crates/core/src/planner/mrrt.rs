//! Manipulation RRT: extensions are projected onto the contact-preserving
//! manifold instead of simulated.

use nalgebra::{DMatrix, DVector};

use super::metric::{distance, sample_state, StateBounds};
use super::tree::{ExplorationTree, PlannerKind, TreeNode};
use super::{CoverageLog, PlanOutput, PlannerConfig};
use crate::error::{Error, Result};
use crate::hand::{
    constraint_matrix, detect_contacts, place_fingertip, HandModel, ObjectShape, State,
    CONTACT_TOLERANCE,
};
use crate::rng::{stream, TAG_STATE_SAMPLE};
use crate::stability::{is_grasp_stable, StabilityConfig};

/// Relative singular-value cutoff of the null-space projector.
const RANK_CUTOFF: f64 = 1e-8;

/// `(I - N^+ N) delta`, computed from the row space of `n` spanned by the
/// right singular vectors above the cutoff.
pub fn projected_delta(n: &DMatrix<f64>, delta: &DVector<f64>) -> DVector<f64> {
    if n.nrows() == 0 {
        return delta.clone();
    }
    let svd = n.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.max();
    let mut out = delta.clone();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > RANK_CUTOFF * smax.max(f64::MIN_POSITIVE) {
            let v = vt.row(i).transpose();
            let coef = v.dot(delta);
            out.axpy(-coef, &v, 1.0);
        }
    }
    out
}

/// `x_node + alpha * (I - N_S^+ N_S) delta` with joints clamped to their
/// limits. Every finger in `subset` must touch the object at `node`.
pub fn project_extension(
    model: &HandModel,
    shape: &ObjectShape,
    node: &State,
    delta: &[f64],
    subset: &[usize],
    alpha: f64,
) -> Result<State> {
    crate::error::check_dim("state delta", model.dof() + 3, delta.len())?;
    let contacts = detect_contacts(model, shape, node, CONTACT_TOLERANCE);
    let n = constraint_matrix(model, node, &contacts, subset)?;
    let p = projected_delta(&n, &DVector::from_column_slice(delta));
    let mut next = node.offset(p.as_slice(), alpha);
    model.clamp_joints(&mut next.q);
    Ok(next)
}

/// Pulls every finger whose gap lies in `(CONTACT_TOLERANCE, threshold]`
/// back onto the surface by moving only that finger's joints. Fingers that
/// do not converge within 50 iterations are left as they were.
pub fn resnap_contacts(
    model: &HandModel,
    shape: &ObjectShape,
    state: &State,
    threshold: f64,
) -> State {
    let mut out = state.clone();
    let contacts = detect_contacts(model, shape, state, CONTACT_TOLERANCE);
    for c in &contacts.contacts {
        if c.gap > CONTACT_TOLERANCE && c.gap <= threshold {
            match place_fingertip(model, shape, &out, c.finger, 0.0, 1e-6, 50) {
                Some([a, b]) => {
                    let r = model.joint_range(c.finger);
                    out.q[r.start] = a;
                    out.q[r.start + 1] = b;
                }
                None => log::debug!("re-snap of finger {} did not converge", c.finger),
            }
        }
    }
    out
}

fn triples(fingers: &[usize]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..fingers.len() {
        for b in a + 1..fingers.len() {
            for c in b + 1..fingers.len() {
                out.push([fingers[a], fingers[b], fingers[c]]);
            }
        }
    }
    out
}

/// A state is admissible for M-RRT if at least three fingers touch the
/// object, no fingertip sinks deeper than the contact band, and the
/// active contacts pass the stability program.
fn admissible(model: &HandModel, shape: &ObjectShape, s: &State, stab: &StabilityConfig) -> bool {
    let cs = detect_contacts(model, shape, s, CONTACT_TOLERANCE);
    cs.count() >= 3
        && cs.contacts.iter().all(|c| c.depth <= CONTACT_TOLERANCE)
        && is_grasp_stable(s, &cs, stab)
}

pub fn grow_mrrt(
    model: &HandModel,
    shape: &ObjectShape,
    root: &State,
    stab: &StabilityConfig,
    cfg: &PlannerConfig,
) -> Result<PlanOutput> {
    cfg.validate()?;
    if root.q.len() != model.dof() {
        return Err(Error::Dimension {
            what: "root joints",
            expected: model.dof(),
            actual: root.q.len(),
        });
    }
    if !admissible(model, shape, root, stab) {
        return Err(Error::Setup(
            "M-RRT root needs a stable grasp with at least three contacts".into(),
        ));
    }
    let bounds = cfg
        .bounds
        .clone()
        .unwrap_or_else(|| StateBounds::around(model, root.pose));
    let root_node = TreeNode {
        id: 0,
        parent: None,
        state: root.clone(),
        action: None,
        velocity: None,
        rotation: 0.0,
        edge_residual: None,
    };
    let mut tree = ExplorationTree::new(PlannerKind::Mrrt, cfg.weights, root_node);
    let mut rng = stream(cfg.seed, &[TAG_STATE_SAMPLE]);
    let mut log = CoverageLog::new(cfg.coverage_every);
    log.record(0, &tree, false);
    let mut iteration = 0;
    while tree.len() < cfg.n_max && iteration < cfg.max_iterations {
        iteration += 1;
        let growth = tree.len() as f64 / cfg.n_max as f64;
        let sample = sample_state(&bounds, root.pose.theta, growth, &mut rng);
        let node = tree.nearest(&sample);
        let (parent, from) = (node.id, node.state.clone());
        let contacts = detect_contacts(model, shape, &from, CONTACT_TOLERANCE);
        let delta: Vec<f64> = sample
            .to_vec()
            .iter()
            .zip(from.to_vec())
            .map(|(a, b)| a - b)
            .collect();
        let delta = DVector::from_vec(delta);

        let mut best: Option<(f64, State, f64)> = None;
        for s in triples(&contacts.active_fingers()) {
            let n = constraint_matrix(model, &from, &contacts, &s)?;
            let p = projected_delta(&n, &delta);
            let len = p.norm();
            if len < 1e-12 {
                continue;
            }
            let scale = if len > cfg.alpha { cfg.alpha / len } else { 1.0 };
            let mut cand = from.offset(p.as_slice(), scale);
            model.clamp_joints(&mut cand.q);
            let moved = DVector::from_vec(
                cand.to_vec().iter().zip(from.to_vec()).map(|(a, b)| a - b).collect(),
            );
            let residual = (&n * moved).norm();
            let cand = resnap_contacts(model, shape, &cand, cfg.resnap_threshold);
            if !admissible(model, shape, &cand, stab) {
                continue;
            }
            let d = distance(&cand, &sample, &cfg.weights);
            if best.as_ref().map_or(true, |(bd, _, _)| d < *bd) {
                best = Some((d, cand, residual));
            }
        }
        if let Some((_, state, residual)) = best {
            tree.add(parent, state, None, None, Some(residual));
        }
        log.record(iteration, &tree, false);
    }
    log.record(iteration, &tree, true);
    tree.meta.push(("seed".into(), cfg.seed.to_string()));
    Ok(PlanOutput {
        tree,
        coverage: log.finish(),
        iterations: iteration,
    })
}
