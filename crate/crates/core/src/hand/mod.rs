//! Planar hand kinematics, object geometry and grasp matrices.

mod contact;
mod grasp;
mod model;
mod placement;
mod shape;

pub use contact::{detect_contacts, fingertip_contact, ContactInfo, ContactSet, CONTACT_TOLERANCE};
pub use grasp::{constraint_matrix, contact_jacobian, grasp_map};
pub(crate) use grasp::grasp_map_of;
pub use model::{FingerPose, FingerSpec, HandModel, Pose2, State, JOINTS_PER_FINGER};
pub(crate) use model::{cross, perp};
pub use placement::{place_fingertip, touching_configuration};
pub use shape::{Category, ObjectShape, ShapeKind, SurfaceQuery};
