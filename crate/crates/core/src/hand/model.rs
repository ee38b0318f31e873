use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// One planar finger: a two-link revolute chain mounted at a fixed base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerSpec {
    /// Base joint position in the hand frame (meters).
    pub base: [f64; 2],
    /// Direction of the straight finger at zero joint angles (radians).
    pub base_angle: f64,
    /// Proximal and distal link lengths (meters).
    pub links: [f64; 2],
    /// `[lower, upper]` limits for the proximal and distal joints (radians).
    pub limits: [[f64; 2]; 2],
}

/// Kinematic description of a planar multi-finger hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    fingers: Vec<FingerSpec>,
    tip_radius: f64,
}

/// Positions along one finger's chain in the hand frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerPose {
    pub base: Vector2<f64>,
    pub elbow: Vector2<f64>,
    pub tip: Vector2<f64>,
    /// Absolute orientation of the proximal and distal links.
    pub link_angles: [f64; 2],
}

pub const JOINTS_PER_FINGER: usize = 2;

/// Object pose in the hand frame. `theta` is never wrapped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Maps a point from the object frame to the hand frame.
    pub fn to_world(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y)
    }

    pub fn rotate_to_world(&self, v: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    /// Maps a hand-frame point into the object frame.
    pub fn to_local(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        let d = Vector2::new(p.x - self.x, p.y - self.y);
        Vector2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

/// Planner-level system state: joint angles plus object pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vec<f64>,
    pub pose: Pose2,
}

impl State {
    pub fn new(q: Vec<f64>, pose: Pose2) -> Self {
        Self { q, pose }
    }

    /// Length of the flat vector `(q, x, y, theta)`.
    pub fn dim(&self) -> usize {
        self.q.len() + 3
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&[self.pose.x, self.pose.y, self.pose.theta]);
        v
    }

    /// Inverse of [`State::to_vec`] for a hand with `dof` joints.
    pub fn from_slice(dof: usize, v: &[f64]) -> Result<Self> {
        check_dim("state vector", dof + 3, v.len())?;
        Ok(Self {
            q: v[..dof].to_vec(),
            pose: Pose2::new(v[dof], v[dof + 1], v[dof + 2]),
        })
    }

    /// `self + scale * delta` where `delta` is laid out like [`State::to_vec`].
    pub fn offset(&self, delta: &[f64], scale: f64) -> Self {
        let d = self.q.len();
        debug_assert_eq!(delta.len(), d + 3);
        Self {
            q: self
                .q
                .iter()
                .zip(delta)
                .map(|(q, dq)| q + scale * dq)
                .collect(),
            pose: Pose2::new(
                self.pose.x + scale * delta[d],
                self.pose.y + scale * delta[d + 1],
                self.pose.theta + scale * delta[d + 2],
            ),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|v| v.is_finite())
            && self.pose.x.is_finite()
            && self.pose.y.is_finite()
            && self.pose.theta.is_finite()
    }
}

#[inline]
pub(crate) fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

#[inline]
pub(crate) fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

impl HandModel {
    pub fn new(fingers: Vec<FingerSpec>, tip_radius: f64) -> Result<Self> {
        if fingers.is_empty() {
            return Err(Error::InvalidModel("hand has no fingers".into()));
        }
        if !(tip_radius > 0.0) {
            return Err(Error::InvalidModel(format!(
                "fingertip radius must be positive, got {tip_radius}"
            )));
        }
        for (i, f) in fingers.iter().enumerate() {
            if f.links.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "finger {i}: link lengths must be positive"
                )));
            }
            if f.limits.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(Error::InvalidModel(format!(
                    "finger {i}: joint limits need lower < upper"
                )));
            }
        }
        Ok(Self {
            fingers,
            tip_radius,
        })
    }

    /// Four two-link fingers whose bases sit on a circle around the
    /// workspace origin at 45, 135, 225 and 315 degrees, each pointing at
    /// the origin.
    pub fn reference() -> Self {
        Self::ring(4, 0.1, [0.04, 0.035], 0.008)
    }

    /// `count` identical fingers evenly spaced on a ring of radius
    /// `base_radius`, starting at 45 degrees.
    pub fn ring(count: usize, base_radius: f64, links: [f64; 2], tip_radius: f64) -> Self {
        let fingers = (0..count)
            .map(|i| {
                let phi = std::f64::consts::FRAC_PI_4
                    + i as f64 * std::f64::consts::TAU / count as f64;
                FingerSpec {
                    base: [base_radius * phi.cos(), base_radius * phi.sin()],
                    base_angle: phi + std::f64::consts::PI,
                    links,
                    limits: [[-1.6, 1.0], [0.0, 2.4]],
                }
            })
            .collect();
        Self::new(fingers, tip_radius).expect("ring hand parameters are valid")
    }

    pub fn fingers(&self) -> &[FingerSpec] {
        &self.fingers
    }

    pub fn num_fingers(&self) -> usize {
        self.fingers.len()
    }

    pub fn dof(&self) -> usize {
        self.fingers.len() * JOINTS_PER_FINGER
    }

    pub fn tip_radius(&self) -> f64 {
        self.tip_radius
    }

    /// Index range of finger `i` inside the joint vector.
    pub fn joint_range(&self, finger: usize) -> std::ops::Range<usize> {
        finger * JOINTS_PER_FINGER..(finger + 1) * JOINTS_PER_FINGER
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.fingers
            .iter()
            .flat_map(|f| [f.limits[0][0], f.limits[1][0]])
            .collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.fingers
            .iter()
            .flat_map(|f| [f.limits[0][1], f.limits[1][1]])
            .collect()
    }

    pub fn clamp_joints(&self, q: &mut [f64]) {
        for (i, f) in self.fingers.iter().enumerate() {
            for j in 0..JOINTS_PER_FINGER {
                let v = &mut q[i * JOINTS_PER_FINGER + j];
                *v = v.clamp(f.limits[j][0], f.limits[j][1]);
            }
        }
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        self.fingers.iter().enumerate().all(|(i, f)| {
            (0..JOINTS_PER_FINGER).all(|j| {
                let v = q[i * JOINTS_PER_FINGER + j];
                v >= f.limits[j][0] && v <= f.limits[j][1]
            })
        })
    }

    /// Chain positions of a single finger. `q` is the full joint vector.
    #[inline]
    pub fn finger_pose(&self, finger: usize, q: &[f64]) -> FingerPose {
        let f = &self.fingers[finger];
        let q0 = q[finger * JOINTS_PER_FINGER];
        let q1 = q[finger * JOINTS_PER_FINGER + 1];
        let a1 = f.base_angle + q0;
        let a2 = a1 + q1;
        let (s1, c1) = a1.sin_cos();
        let (s2, c2) = a2.sin_cos();
        let base = Vector2::new(f.base[0], f.base[1]);
        let elbow = base + f.links[0] * Vector2::new(c1, s1);
        let tip = elbow + f.links[1] * Vector2::new(c2, s2);
        FingerPose {
            base,
            elbow,
            tip,
            link_angles: [a1, a2],
        }
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Vec<FingerPose>> {
        check_dim("joint vector", self.dof(), q.len())?;
        Ok((0..self.num_fingers())
            .map(|i| self.finger_pose(i, q))
            .collect())
    }

    /// Jacobian (2x2) of a point rigidly attached to the distal link of
    /// `finger`, with respect to that finger's two joints.
    #[inline]
    pub fn point_jacobian(pose: &FingerPose, point: &Vector2<f64>) -> Matrix2<f64> {
        let c0 = perp(point - pose.base);
        let c1 = perp(point - pose.elbow);
        Matrix2::new(c0.x, c1.x, c0.y, c1.y)
    }

    /// Damped least-squares joint step moving the fingertip of `finger` by
    /// `displacement`. Returns the per-joint change.
    pub fn tip_ik_step(
        &self,
        finger: usize,
        q: &[f64],
        displacement: &Vector2<f64>,
        damping: f64,
    ) -> [f64; 2] {
        let pose = self.finger_pose(finger, q);
        let j = Self::point_jacobian(&pose, &pose.tip);
        let jjt = j * j.transpose() + Matrix2::identity() * (damping * damping);
        let y = jjt
            .try_inverse()
            .map(|inv| inv * displacement)
            .unwrap_or_else(Vector2::zeros);
        let dq = j.transpose() * y;
        [dq.x, dq.y]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn single_finger() -> HandModel {
        HandModel::new(
            vec![FingerSpec {
                base: [0.0, 0.0],
                base_angle: 0.0,
                links: [0.1, 0.1],
                limits: [[-3.0, 3.0], [-3.0, 3.0]],
            }],
            0.008,
        )
        .unwrap()
    }

    #[test]
    fn straight_chain_sums_link_lengths() {
        let hand = single_finger();
        let fk = hand.forward_kinematics(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(fk[0].tip, Vector2::new(0.2, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotated_chain() {
        let hand = single_finger();
        let fk = hand.forward_kinematics(&[FRAC_PI_2, 0.0]).unwrap();
        assert_relative_eq!(fk[0].tip, Vector2::new(0.0, 0.2), epsilon = 1e-15);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let hand = HandModel::reference();
        assert!(matches!(
            hand.forward_kinematics(&[0.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut f = single_finger().fingers()[0].clone();
        f.links[1] = 0.0;
        assert!(HandModel::new(vec![f.clone()], 0.01).is_err());
        f.links[1] = 0.1;
        f.limits[0] = [1.0, -1.0];
        assert!(HandModel::new(vec![f.clone()], 0.01).is_err());
        f.limits[0] = [-1.0, 1.0];
        assert!(HandModel::new(vec![f], 0.0).is_err());
    }

    #[test]
    fn fingertip_depends_only_on_own_joints() {
        let hand = HandModel::reference();
        let q = vec![-0.5, 1.2, -0.4, 1.1, -0.6, 1.3, -0.7, 1.0];
        let mut q2 = q.clone();
        q2[2] += 0.3;
        q2[3] -= 0.2;
        let a = hand.forward_kinematics(&q).unwrap();
        let b = hand.forward_kinematics(&q2).unwrap();
        for i in [0, 2, 3] {
            assert_eq!(a[i].tip, b[i].tip);
        }
        assert_ne!(a[1].tip, b[1].tip);
    }

    #[test]
    fn pose_round_trip() {
        let pose = Pose2::new(0.01, -0.02, 7.3);
        let p = Vector2::new(0.03, 0.004);
        assert_relative_eq!(pose.to_local(&pose.to_world(&p)), p, epsilon = 1e-15);
    }
}
