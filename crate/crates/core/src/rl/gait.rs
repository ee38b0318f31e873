//! A hand-written finger-gaiting controller for round objects: all
//! fingertips sweep around the object together, then each finger in turn
//! lifts off, moves back and presses on again. It reads the object pose
//! directly, so it serves as a reference controller rather than a policy.

use nalgebra::Vector2;

use super::env::Env;
use crate::hand::HandModel;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    Sweep(usize),
    Lift(usize, usize),
    Travel(usize, usize),
    Place(usize, usize),
}

#[derive(Clone, Debug)]
pub struct ScriptedGait {
    /// Angle advanced by every fingertip per control step (rad).
    pub sweep_rate: f64,
    pub sweep_steps: usize,
    /// Control steps spent on each stage of a regrasp.
    pub regrasp_steps: usize,
    /// Setpoint depth inside the surface while pressing (m).
    pub squeeze: f64,
    /// Clearance while a finger travels back (m).
    pub lift: f64,
    phase: Phase,
    angles: Vec<f64>,
    center: Vector2<f64>,
}

impl ScriptedGait {
    pub fn new(sweep_rate: f64) -> Self {
        Self {
            sweep_rate,
            sweep_steps: 6,
            regrasp_steps: 2,
            squeeze: 0.003,
            lift: 0.012,
            phase: Phase::Sweep(0),
            angles: Vec::new(),
            center: Vector2::zeros(),
        }
    }

    fn solve(model: &HandModel, finger: usize, q: &mut [f64], target: &Vector2<f64>) {
        let r = model.joint_range(finger);
        for _ in 0..30 {
            let tip = model.finger_pose(finger, q).tip;
            let err = target - tip;
            if err.norm() < 1e-6 {
                break;
            }
            let dq = model.tip_ik_step(finger, q, &err, 1e-3);
            q[r.start] += dq[0].clamp(-0.2, 0.2);
            q[r.start + 1] += dq[1].clamp(-0.2, 0.2);
            model.clamp_joints(q);
        }
    }

    /// Unit action for the next control step of `env`.
    pub fn act(&mut self, env: &Env) -> Vec<f64> {
        let model = env.sim.model();
        let s = &env.state;
        let m = model.num_fingers();
        if self.angles.len() != m {
            self.center = s.state.pose.position();
            let center = self.center;
            self.angles = (0..m)
                .map(|i| {
                    let d = model.finger_pose(i, &s.state.q).tip - center;
                    d.y.atan2(d.x)
                })
                .collect();
            self.phase = Phase::Sweep(0);
        }
        let center = self.center;
        let radius = env.sim.shape().bounding_radius() + model.tip_radius();
        let mut radii = vec![radius - self.squeeze; m];
        let stride = self.sweep_rate * self.sweep_steps as f64;
        self.phase = match self.phase {
            Phase::Sweep(k) => {
                for a in &mut self.angles {
                    *a += self.sweep_rate;
                }
                if k + 1 < self.sweep_steps {
                    Phase::Sweep(k + 1)
                } else {
                    Phase::Lift(0, 0)
                }
            }
            Phase::Lift(f, k) => {
                radii[f] = radius + self.lift;
                if k + 1 < self.regrasp_steps {
                    Phase::Lift(f, k + 1)
                } else {
                    Phase::Travel(f, 0)
                }
            }
            Phase::Travel(f, k) => {
                radii[f] = radius + self.lift;
                self.angles[f] -= stride / self.regrasp_steps as f64;
                if k + 1 < self.regrasp_steps {
                    Phase::Travel(f, k + 1)
                } else {
                    Phase::Place(f, 0)
                }
            }
            Phase::Place(f, k) => {
                if k + 1 < self.regrasp_steps {
                    Phase::Place(f, k + 1)
                } else if f + 1 < m {
                    Phase::Lift(f + 1, 0)
                } else {
                    Phase::Sweep(0)
                }
            }
        };
        let mut q = s.setpoints.clone();
        for i in 0..m {
            let a = self.angles[i];
            let target = center + Vector2::new(a.cos(), a.sin()) * radii[i];
            Self::solve(model, i, &mut q, &target);
        }
        q.iter()
            .zip(&s.setpoints)
            .map(|(t, c)| ((t - c) / env.cfg.action_scale).clamp(-1.0, 1.0))
            .collect()
    }
}
