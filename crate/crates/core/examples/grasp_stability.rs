//! The internal-force stability test on a few textbook contact layouts and
//! on the hand's own grasp.
//!
//!     cargo run --example grasp_stability

use dexplore::hand::{detect_contacts, touching_configuration, ContactInfo, HandModel, ObjectShape, Pose2, State};
use dexplore::stability::{grasp_stability, internal_force_qp, StabilityConfig};
use nalgebra::{DMatrix, Vector2};

fn layout(angles_deg: &[f64], radius: f64) -> (Vec<ContactInfo>, DMatrix<f64>) {
    let contacts: Vec<ContactInfo> = angles_deg
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let u = Vector2::new(a.to_radians().cos(), a.to_radians().sin());
            ContactInfo {
                finger: i,
                point: u * radius,
                normal: -u,
                gap: 0.0,
                depth: 0.0,
                active: true,
            }
        })
        .collect();
    let mut g = DMatrix::zeros(2 * contacts.len(), 3);
    for (k, c) in contacts.iter().enumerate() {
        g[(2 * k, 0)] = 1.0;
        g[(2 * k, 2)] = -c.point.y;
        g[(2 * k + 1, 1)] = 1.0;
        g[(2 * k + 1, 2)] = c.point.x;
    }
    (contacts, g)
}

fn main() -> dexplore::Result<()> {
    let disc = ObjectShape::preset("disc")?;
    let cfg = StabilityConfig::for_shape(&disc);
    for (name, angles) in [
        ("antipodal", vec![0.0, 180.0]),
        ("single", vec![0.0]),
        ("three at 120 deg", vec![0.0, 120.0, 240.0]),
        ("orthogonal", vec![0.0, 90.0]),
    ] {
        let (contacts, g) = layout(&angles, 0.035);
        let r = internal_force_qp(&contacts, &g, &cfg)?;
        println!(
            "{name:>16}: |w| = {:.4}, forces {:?}, stable {}",
            r.wrench_norm, r.magnitudes, r.stable
        );
    }

    let hand = HandModel::reference();
    for name in ["disc", "square", "l_polygon"] {
        let shape = ObjectShape::preset(name)?;
        let q = touching_configuration(&hand, &shape, Pose2::default(), 0.0).expect("reachable");
        let state = State::new(q, Pose2::default());
        let cs = detect_contacts(&hand, &shape, &state, dexplore::hand::CONTACT_TOLERANCE);
        let r = grasp_stability(&state, &cs, &StabilityConfig::for_shape(&shape))?;
        println!("hand on {name}: |w| = {:.4}, stable {}", r.wrench_norm, r.stable);
    }
    Ok(())
}
