#![allow(dead_code)]

use dexplore::hand::{fingertip_contact, Category, ContactInfo, ObjectShape, Pose2, State};
use dexplore::rng::stream;
use nalgebra::{DMatrix, Vector2};
use rand::Rng;
use std::f64::consts::TAU;

/// Random star-shaped polygon: jittered evenly spaced angles and radii.
pub fn random_polygon<R: Rng>(rng: &mut R) -> ObjectShape {
    let n = rng.gen_range(3..8);
    let step = TAU / n as f64;
    let angles: Vec<f64> = (0..n)
        .map(|i| i as f64 * step + rng.gen_range(-0.3..0.3) * step)
        .collect();
    let verts: Vec<[f64; 2]> = angles
        .iter()
        .map(|a| {
            let r = rng.gen_range(0.02..0.05);
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    ObjectShape::polygon("random", &verts, Category::Easy).unwrap()
}

/// Contacts of `k` fingertips touching random points of `shape`, with the
/// grasp map built from first principles (independent of the library).
pub fn random_contacts<R: Rng>(shape: &ObjectShape, k: usize, rng: &mut R) -> (Vec<ContactInfo>, DMatrix<f64>) {
    let state = State::new(vec![], Pose2::default());
    let contacts: Vec<ContactInfo> = (0..k)
        .map(|i| {
            // Aim a tip from outside toward a random direction until it
            // touches the surface.
            let a = rng.gen_range(0.0..TAU);
            let dir = Vector2::new(a.cos(), a.sin());
            let (mut lo, mut hi) = (0.0, 0.2);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let c = fingertip_contact(i, &(dir * mid), 0.008, shape, &state, 0.0);
                if c.gap > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut c = fingertip_contact(i, &(dir * hi), 0.008, shape, &state, 1e-9);
            c.active = true;
            c
        })
        .collect();
    let mut g = DMatrix::zeros(2 * k, 3);
    for (row, c) in contacts.iter().enumerate() {
        g[(2 * row, 0)] = 1.0;
        g[(2 * row, 2)] = -c.point.y;
        g[(2 * row + 1, 1)] = 1.0;
        g[(2 * row + 1, 2)] = c.point.x;
    }
    (contacts, g)
}

pub fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    stream(seed, &[0xACCE])
}
