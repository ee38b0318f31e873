use nalgebra::Vector2;

use super::model::{HandModel, State};
use super::shape::ObjectShape;

/// Default surface-distance band within which a fingertip counts as touching.
pub const CONTACT_TOLERANCE: f64 = 1e-3;

/// Contact state of one fingertip against the object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactInfo {
    pub finger: usize,
    /// Closest point on the object surface, hand frame.
    pub point: Vector2<f64>,
    /// Unit direction along which the finger pushes the object (the inward
    /// surface normal), hand frame.
    pub normal: Vector2<f64>,
    /// Fingertip-surface gap; negative when penetrating.
    pub gap: f64,
    /// `max(0, -gap)`.
    pub depth: f64,
    pub active: bool,
}

/// One entry per finger, in finger order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<ContactInfo>,
}

impl ContactSet {
    pub fn active(&self) -> impl Iterator<Item = &ContactInfo> + '_ {
        self.contacts.iter().filter(|c| c.active)
    }

    pub fn active_fingers(&self) -> Vec<usize> {
        self.active().map(|c| c.finger).collect()
    }

    /// Number of active contacts.
    pub fn count(&self) -> usize {
        self.active().count()
    }

    pub fn get(&self, finger: usize) -> Option<&ContactInfo> {
        self.contacts.iter().find(|c| c.finger == finger)
    }

    pub fn is_active(&self, finger: usize) -> bool {
        self.get(finger).is_some_and(|c| c.active)
    }

    /// The active contacts of `fingers`, in the given order.
    pub fn subset(&self, fingers: &[usize]) -> Option<Vec<ContactInfo>> {
        fingers
            .iter()
            .map(|&f| self.get(f).filter(|c| c.active).copied())
            .collect()
    }
}

/// Contact of a single fingertip at hand-frame position `tip`.
#[inline]
pub fn fingertip_contact(
    finger: usize,
    tip: &Vector2<f64>,
    tip_radius: f64,
    shape: &ObjectShape,
    state: &State,
    tolerance: f64,
) -> ContactInfo {
    let local = state.pose.to_local(tip);
    let sq = shape.query(&local);
    let gap = sq.signed_distance - tip_radius;
    ContactInfo {
        finger,
        point: state.pose.to_world(&sq.closest),
        normal: -state.pose.rotate_to_world(&sq.outward),
        gap,
        depth: (-gap).max(0.0),
        active: gap <= tolerance,
    }
}

/// Fingertip/object contacts for every finger.
pub fn detect_contacts(
    model: &HandModel,
    shape: &ObjectShape,
    state: &State,
    tolerance: f64,
) -> ContactSet {
    let contacts = (0..model.num_fingers())
        .map(|i| {
            let tip = model.finger_pose(i, &state.q).tip;
            fingertip_contact(i, &tip, model.tip_radius(), shape, state, tolerance)
        })
        .collect();
    ContactSet { contacts }
}
