//! Forward kinematics, contact detection and the contact-constraint
//! matrices of the reference hand grasping a disc, then a null-space step
//! that keeps three fingers on the object.
//!
//!     cargo run --example hand_kinematics

use dexplore::hand::{
    constraint_matrix, contact_jacobian, detect_contacts, grasp_map, touching_configuration,
    HandModel, ObjectShape, Pose2, State, CONTACT_TOLERANCE,
};
use dexplore::planner::projected_delta;
use nalgebra::DVector;

fn main() -> dexplore::Result<()> {
    let hand = HandModel::reference();
    let disc = ObjectShape::preset("disc")?;
    let pose = Pose2::default();
    let q = touching_configuration(&hand, &disc, pose, 0.0).expect("reference hand reaches the disc");
    let state = State::new(q, pose);

    for (i, f) in hand.forward_kinematics(&state.q)?.iter().enumerate() {
        println!("finger {i}: tip at ({:+.4}, {:+.4})", f.tip.x, f.tip.y);
    }
    let contacts = detect_contacts(&hand, &disc, &state, CONTACT_TOLERANCE);
    println!("active contacts: {:?}", contacts.active_fingers());

    let subset = [0, 1, 2];
    let j = contact_jacobian(&hand, &state, &contacts, &subset)?;
    let g = grasp_map(&state, &contacts, &subset)?;
    println!("J_S is {}x{}, G_S is {}x{}", j.nrows(), j.ncols(), g.nrows(), g.ncols());

    // Ask for a pure object rotation and keep only the part that
    // preserves the three contacts to first order.
    let n = constraint_matrix(&hand, &state, &contacts, &subset)?;
    let mut want = DVector::zeros(hand.dof() + 3);
    want[hand.dof() + 2] = 0.1;
    let step = projected_delta(&n, &want);
    println!("|N dx| before {:.3e}, after {:.3e}", (&n * &want).norm(), (&n * &step).norm());
    println!("object rotation kept: {:.4} rad", step[hand.dof() + 2]);
    Ok(())
}
