use rand::Rng;

use crate::hand::{Pose2, State};

/// Per-coordinate weights of the state-space metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceWeights {
    /// Per joint radian.
    pub joint: f64,
    /// Per object meter.
    pub position: f64,
    /// Per object radian (unwrapped).
    pub angle: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            joint: 1.0,
            position: 5.0,
            angle: 2.0,
        }
    }
}

/// Weighted Euclidean distance over `(q, x, y, theta)`. The angle is
/// compared unwrapped, so states a full turn apart are far apart.
#[inline]
pub fn distance(a: &State, b: &State, w: &DistanceWeights) -> f64 {
    let joints: f64 = a
        .q
        .iter()
        .zip(&b.q)
        .map(|(x, y)| {
            let d = w.joint * (x - y);
            d * d
        })
        .sum();
    let dx = w.position * (a.pose.x - b.pose.x);
    let dy = w.position * (a.pose.y - b.pose.y);
    let dt = w.angle * (a.pose.theta - b.pose.theta);
    (joints + dx * dx + dy * dy + dt * dt).sqrt()
}

/// Sampling box for the planners.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBounds {
    /// `[lower, upper]` per joint.
    pub joints: Vec<[f64; 2]>,
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// Half-width of the angle window around the root angle before
    /// expansion (radians).
    pub angle_window: f64,
}

impl StateBounds {
    /// Joint limits of the hand, a 2 cm box around `center` and a 2 pi
    /// angle window.
    pub fn around(model: &crate::hand::HandModel, center: Pose2) -> Self {
        let lo = model.lower_limits();
        let hi = model.upper_limits();
        Self {
            joints: lo.into_iter().zip(hi).map(|(l, h)| [l, h]).collect(),
            x: [center.x - 0.02, center.x + 0.02],
            y: [center.y - 0.02, center.y + 0.02],
            angle_window: std::f64::consts::TAU,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Uniform sample inside `bounds`. The angle is drawn from
/// `root_theta +- angle_window * (1 + growth)` where `growth` is the
/// fraction of the node budget already used.
pub fn sample_state<R: Rng + ?Sized>(
    bounds: &StateBounds,
    root_theta: f64,
    growth: f64,
    rng: &mut R,
) -> State {
    let q = bounds.joints.iter().map(|&b| uniform(rng, b)).collect();
    let half = bounds.angle_window * (1.0 + growth);
    let pose = Pose2::new(
        uniform(rng, bounds.x),
        uniform(rng, bounds.y),
        uniform(rng, [root_theta - half, root_theta + half]),
    );
    State::new(q, pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(v: &[f64]) -> State {
        State::from_slice(v.len() - 3, v).unwrap()
    }

    #[test]
    fn angle_only_difference() {
        let w = DistanceWeights::default();
        let a = state(&[0.1, 0.2, 0.0, 0.0, 1.0]);
        let b = state(&[0.1, 0.2, 0.0, 0.0, 1.3]);
        assert!((distance(&a, &b, &w) - 2.0 * 0.3).abs() < 1e-12);
        assert_eq!(distance(&a, &a, &w), 0.0);
    }

    #[test]
    fn degenerate_bounds_return_the_point() {
        let bounds = StateBounds {
            joints: vec![[0.3, 0.3], [-0.2, -0.2]],
            x: [0.01, 0.01],
            y: [-0.02, -0.02],
            angle_window: 0.0,
        };
        let mut rng = crate::rng::stream(1, &[]);
        let s = sample_state(&bounds, 1.5, 0.0, &mut rng);
        assert_eq!(s, state(&[0.3, -0.2, 0.01, -0.02, 1.5]));
    }

    fn arb_state() -> impl Strategy<Value = State> {
        prop::collection::vec(-3.0f64..3.0, 7).prop_map(|v| state(&v))
    }

    proptest! {
        #[test]
        fn metric_axioms(a in arb_state(), b in arb_state(), c in arb_state()) {
            let w = DistanceWeights::default();
            let ab = distance(&a, &b, &w);
            prop_assert_eq!(ab, distance(&b, &a, &w));
            prop_assert!(ab >= 0.0);
            prop_assert!(ab <= distance(&a, &c, &w) + distance(&c, &b, &w) + 1e-12);
            prop_assert_eq!(distance(&a, &a, &w), 0.0);
        }
    }
}
