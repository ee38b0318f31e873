//! Contact Jacobian, grasp map and the contact-maintenance constraint.
//!
//! Contacts are point contacts with translational rows only, so each contact
//! contributes two rows. Object twists are ordered `(vx, vy, omega)`.

use nalgebra::DMatrix;

use super::contact::{ContactInfo, ContactSet};
use super::model::{HandModel, State, JOINTS_PER_FINGER};
use crate::error::{Error, Result};

fn selected(contacts: &ContactSet, subset: &[usize]) -> Result<Vec<ContactInfo>> {
    subset
        .iter()
        .map(|&f| match contacts.get(f) {
            Some(c) if c.active => Ok(*c),
            _ => Err(Error::NotInContact(f)),
        })
        .collect()
}

/// `J_S`: maps joint velocities to the velocities of the contact points of
/// the fingers in `subset`, each point treated as fixed to its distal link.
pub fn contact_jacobian(
    model: &HandModel,
    state: &State,
    contacts: &ContactSet,
    subset: &[usize],
) -> Result<DMatrix<f64>> {
    let sel = selected(contacts, subset)?;
    let mut j = DMatrix::zeros(2 * sel.len(), model.dof());
    for (row, c) in sel.iter().enumerate() {
        let pose = model.finger_pose(c.finger, &state.q);
        let block = HandModel::point_jacobian(&pose, &c.point);
        let col = c.finger * JOINTS_PER_FINGER;
        j.view_mut((2 * row, col), (2, 2)).copy_from(&block);
    }
    Ok(j)
}

/// `G_S`: maps the object twist to the velocities of the material points at
/// the contacts. Its transpose maps stacked contact forces to the net
/// wrench `(fx, fy, torque)` about the object center.
pub fn grasp_map(state: &State, contacts: &ContactSet, subset: &[usize]) -> Result<DMatrix<f64>> {
    let sel = selected(contacts, subset)?;
    Ok(grasp_map_of(state, &sel))
}

pub(crate) fn grasp_map_of(state: &State, sel: &[ContactInfo]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2 * sel.len(), 3);
    for (row, c) in sel.iter().enumerate() {
        let r = c.point - state.pose.position();
        g[(2 * row, 0)] = 1.0;
        g[(2 * row, 2)] = -r.y;
        g[(2 * row + 1, 1)] = 1.0;
        g[(2 * row + 1, 2)] = r.x;
    }
    g
}

/// `N_S = [J_S  -G_S]`, acting on state deltas laid out as `(dq, dp)`.
pub fn constraint_matrix(
    model: &HandModel,
    state: &State,
    contacts: &ContactSet,
    subset: &[usize],
) -> Result<DMatrix<f64>> {
    let j = contact_jacobian(model, state, contacts, subset)?;
    let g = grasp_map(state, contacts, subset)?;
    let d = model.dof();
    let mut n = DMatrix::zeros(j.nrows(), d + 3);
    n.view_mut((0, 0), (j.nrows(), d)).copy_from(&j);
    n.view_mut((0, d), (g.nrows(), 3)).copy_from(&(-g));
    Ok(n)
}
