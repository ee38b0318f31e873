//! Fingertip placement by damped least squares.

use super::contact::fingertip_contact;
use super::model::{HandModel, Pose2, State};
use super::shape::ObjectShape;

const MAX_JOINT_STEP: f64 = 0.1;

/// Moves the joints of `finger` until its fingertip gap to the object equals
/// `target_gap` within `tolerance`. Returns the new joint pair, or `None`
/// if the iteration does not converge within `max_iterations`.
pub fn place_fingertip(
    model: &HandModel,
    shape: &ObjectShape,
    state: &State,
    finger: usize,
    target_gap: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Option<[f64; 2]> {
    let mut q = state.q.clone();
    let range = model.joint_range(finger);
    for _ in 0..=max_iterations {
        let probe = State::new(q.clone(), state.pose);
        let tip = model.finger_pose(finger, &q).tip;
        let c = fingertip_contact(finger, &tip, model.tip_radius(), shape, &probe, 0.0);
        let err = c.gap - target_gap;
        if err.abs() <= tolerance {
            return Some([q[range.start], q[range.start + 1]]);
        }
        // Moving the tip along the push direction closes the gap.
        let mut dq = model.tip_ik_step(finger, &q, &(c.normal * err), 1e-3);
        let size = dq[0].abs().max(dq[1].abs());
        if size > MAX_JOINT_STEP {
            dq = [dq[0] * MAX_JOINT_STEP / size, dq[1] * MAX_JOINT_STEP / size];
        }
        q[range.start] += dq[0];
        q[range.start + 1] += dq[1];
        model.clamp_joints(&mut q);
    }
    None
}

/// Joint configuration with every fingertip touching the object at `pose`,
/// starting from a half-flexed posture. `None` if some finger cannot reach.
pub fn touching_configuration(
    model: &HandModel,
    shape: &ObjectShape,
    pose: Pose2,
    target_gap: f64,
) -> Option<Vec<f64>> {
    let mut q: Vec<f64> = model
        .fingers()
        .iter()
        .flat_map(|f| {
            [
                0.5 * (f.limits[0][0] + f.limits[0][1]),
                0.5 * (f.limits[1][0] + f.limits[1][1]),
            ]
        })
        .collect();
    for i in 0..model.num_fingers() {
        let state = State::new(q.clone(), pose);
        let [a, b] = place_fingertip(model, shape, &state, i, target_gap, 1e-7, 200)?;
        let r = model.joint_range(i);
        q[r.start] = a;
        q[r.start + 1] = b;
    }
    Some(q)
}
