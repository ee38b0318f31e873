//! Quasi-dynamic transition function for the hand-object system.
//!
//! Links are massless: each joint moves at a velocity set by its position
//! servo and the torque from fingertip contact springs, capped at the joint
//! velocity limit. Only the object carries inertia. Fingertip contacts are
//! penalty springs with normal damping; tangential friction is a viscous
//! drag toward the fingertip's velocity, clamped to the Coulomb bound and
//! integrated implicitly so that sticking contacts stay stable at the 2 ms
//! step.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::hand::{
    detect_contacts, fingertip_contact, perp, ContactSet, HandModel, ObjectShape, State,
    CONTACT_TOLERANCE,
};

/// Largest hand the simulator supports without allocation.
pub const MAX_FINGERS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Joint servo proportional gain (N m / rad).
    pub servo_gain: f64,
    /// Joint viscous resistance converting torque to velocity (N m s / rad).
    pub joint_damping: f64,
    /// Joint speed cap (rad / s).
    pub velocity_limit: f64,
    /// Normal contact stiffness (N / m).
    pub contact_stiffness: f64,
    /// Normal contact damping (N s / m).
    pub contact_damping: f64,
    /// Coulomb coefficient.
    pub friction: f64,
    /// Tangential drag coefficient before the Coulomb clamp (N s / m).
    pub tangential_viscosity: f64,
    /// Gravity magnitude along -y (m / s^2).
    pub gravity: f64,
    pub mass: f64,
    /// Rotational inertia about the center of mass (kg m^2).
    pub inertia: f64,
    /// The object counts as dropped once its center is this far below the
    /// workspace origin (m).
    pub drop_height: f64,
    /// Duration of the hold-still rollout used as a stability check (s).
    pub rollout_duration: f64,
    /// Simulation steps per control interval.
    pub control_steps: usize,
    /// Surface-distance band for contact detection (m).
    pub contact_tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.002,
            servo_gain: 5.0,
            joint_damping: 0.25,
            velocity_limit: 1.0,
            contact_stiffness: 5000.0,
            contact_damping: 10.0,
            friction: 0.8,
            tangential_viscosity: 200.0,
            gravity: 9.81,
            mass: 0.1,
            inertia: 0.5 * 0.1 * 0.035 * 0.035,
            drop_height: 0.1,
            rollout_duration: 1.0,
            control_steps: 50,
            contact_tolerance: CONTACT_TOLERANCE,
        }
    }
}

impl SimConfig {
    /// Defaults with the inertia computed from `shape` at the default mass.
    pub fn for_shape(shape: &ObjectShape) -> Self {
        let base = Self::default();
        Self {
            inertia: shape.inertia(base.mass),
            ..base
        }
    }

    pub fn rollout_steps(&self) -> usize {
        (self.rollout_duration / self.dt).round() as usize
    }

    pub fn control_interval(&self) -> f64 {
        self.control_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("servo_gain", self.servo_gain),
            ("joint_damping", self.joint_damping),
            ("velocity_limit", self.velocity_limit),
            ("contact_stiffness", self.contact_stiffness),
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("drop_height", self.drop_height),
            ("rollout_duration", self.rollout_duration),
            ("contact_tolerance", self.contact_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("sim.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("contact_damping", self.contact_damping),
            ("friction", self.friction),
            ("tangential_viscosity", self.tangential_viscosity),
            ("gravity", self.gravity),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("sim.{name} must be non-negative, got {v}")));
            }
        }
        let ratio = self.rollout_duration / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(
                "sim.rollout_duration must be an integer multiple of sim.dt".into(),
            ));
        }
        if self.control_steps == 0 {
            return Err(Error::Config("sim.control_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Joint setpoints for the position servos (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct Action(pub Vec<f64>);

/// Full simulator state.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub state: State,
    /// Object twist `(vx, vy, omega)`.
    pub velocity: [f64; 3],
    pub setpoints: Vec<f64>,
}

impl SimState {
    /// At rest, servos holding the current joint positions.
    pub fn at_rest(state: State) -> Self {
        let setpoints = state.q.clone();
        Self {
            state,
            velocity: [0.0; 3],
            setpoints,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.state.is_finite()
            && self.velocity.iter().all(|v| v.is_finite())
            && self.setpoints.iter().all(|v| v.is_finite())
    }

    /// Flat vector `(q, x, y, theta, vx, vy, omega, setpoints)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.state.to_vec();
        v.extend_from_slice(&self.velocity);
        v.extend_from_slice(&self.setpoints);
        v
    }

    pub fn from_slice(dof: usize, v: &[f64]) -> Result<Self> {
        check_dim("sim state vector", 2 * dof + 6, v.len())?;
        Ok(Self {
            state: State::from_slice(dof, &v[..dof + 3])?,
            velocity: [v[dof + 3], v[dof + 4], v[dof + 5]],
            setpoints: v[dof + 6..].to_vec(),
        })
    }

    /// Single-line text record; floats use shortest round-trip formatting.
    pub fn to_record(&self) -> String {
        join_floats(&self.to_vec())
    }

    pub fn from_record(dof: usize, line: &str) -> Result<Self> {
        let v = parse_floats(line, 0)?;
        Self::from_slice(dof, &v)
    }
}

pub(crate) fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad number `{t}`: {e}"),
            })
        })
        .collect()
}

/// Opaque saved simulator state.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot(SimState);

/// Per-step contact report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    /// Net contact force applied by each fingertip to the object (N).
    pub forces: Vec<[f64; 2]>,
    /// Geometric contact flags at the start of the step.
    pub contacts: Vec<bool>,
}

impl StepInfo {
    pub fn force_magnitude(&self, finger: usize) -> f64 {
        let [x, y] = self.forces[finger];
        x.hypot(y)
    }
}

struct Spec {
    model: HandModel,
    shape: ObjectShape,
    config: SimConfig,
}

/// The transition function `F(x, a)`. Instances are immutable and cheap to
/// clone; every worker can own one.
#[derive(Clone)]
pub struct Simulator {
    spec: Arc<Spec>,
}

#[derive(Clone, Copy, Default)]
struct ContactScratch {
    active: bool,
    normal: Vector2<f64>,
    /// lever arm from the object center
    lever: Vector2<f64>,
    /// fingertip contact-point velocity
    finger_velocity: Vector2<f64>,
    normal_force: f64,
    /// tangential projector applied to relative velocity
    sliding: bool,
    tangential: Vector2<f64>,
}

impl Simulator {
    pub fn new(model: HandModel, shape: ObjectShape, config: SimConfig) -> Result<Self> {
        config.validate()?;
        if model.num_fingers() > MAX_FINGERS {
            return Err(Error::InvalidModel(format!(
                "simulator supports at most {MAX_FINGERS} fingers"
            )));
        }
        Ok(Self {
            spec: Arc::new(Spec {
                model,
                shape,
                config,
            }),
        })
    }

    /// An independent instance for another worker.
    pub fn instance(&self) -> Self {
        self.clone()
    }

    pub fn model(&self) -> &HandModel {
        &self.spec.model
    }

    pub fn shape(&self) -> &ObjectShape {
        &self.spec.shape
    }

    pub fn config(&self) -> &SimConfig {
        &self.spec.config
    }

    pub fn contacts(&self, state: &State) -> ContactSet {
        detect_contacts(
            &self.spec.model,
            &self.spec.shape,
            state,
            self.spec.config.contact_tolerance,
        )
    }

    pub fn snapshot(&self, s: &SimState) -> Snapshot {
        Snapshot(s.clone())
    }

    pub fn restore(&self, snap: &Snapshot) -> SimState {
        snap.0.clone()
    }

    pub fn is_dropped(&self, s: &SimState) -> bool {
        s.state.pose.y < -self.spec.config.drop_height
    }

    fn validate_state(&self, s: &SimState) -> Result<()> {
        let d = self.spec.model.dof();
        check_dim("joint vector", d, s.state.q.len())?;
        check_dim("setpoints", d, s.setpoints.len())?;
        if !s.is_finite() {
            return Err(Error::NonFinite("sim state"));
        }
        Ok(())
    }

    /// Sets new servo setpoints, clamped to the joint limits.
    pub fn apply_action(&self, s: &mut SimState, action: &Action) -> Result<()> {
        check_dim("action", self.spec.model.dof(), action.0.len())?;
        check_finite("action", &action.0)?;
        s.setpoints.clone_from(&action.0);
        self.spec.model.clamp_joints(&mut s.setpoints);
        Ok(())
    }

    /// One integration step with the given action.
    pub fn step(&self, s: &SimState, action: &Action) -> Result<(SimState, StepInfo)> {
        self.validate_state(s)?;
        let mut next = s.clone();
        self.apply_action(&mut next, action)?;
        let mut info = StepInfo::default();
        self.advance(&mut next, Some(&mut info));
        Ok((next, info))
    }

    /// Applies `action` and holds it for one control interval. Returns the
    /// report of the final step.
    pub fn control(&self, s: &mut SimState, action: &Action) -> Result<StepInfo> {
        self.validate_state(s)?;
        self.apply_action(s, action)?;
        let mut info = StepInfo::default();
        let n = self.spec.config.control_steps;
        for i in 0..n {
            if i + 1 == n {
                self.advance(s, Some(&mut info));
            } else {
                self.advance(s, None);
            }
        }
        Ok(info)
    }

    /// Holds the current setpoints for the rollout duration; `true` iff the
    /// object never drops below the threshold.
    pub fn rollout_stability_check(&self, s: &SimState) -> bool {
        if self.is_dropped(s) || !s.is_finite() {
            return false;
        }
        let mut sim = s.clone();
        for _ in 0..self.spec.config.rollout_steps() {
            self.advance(&mut sim, None);
            if self.is_dropped(&sim) || !sim.is_finite() {
                return false;
            }
        }
        true
    }

    /// Advances the state by one `dt` in place.
    pub fn advance(&self, s: &mut SimState, info: Option<&mut StepInfo>) {
        let Spec {
            model,
            shape,
            config: cfg,
        } = &*self.spec;
        let m = model.num_fingers();
        let dt = cfg.dt;
        let center = s.state.pose.position();
        let v = Vector2::new(s.velocity[0], s.velocity[1]);
        let omega = s.velocity[2];

        let mut scratch = [ContactScratch::default(); MAX_FINGERS];
        let mut flags = [false; MAX_FINGERS];
        let mut qdot = [0.0; 2 * MAX_FINGERS];

        for i in 0..m {
            let pose = model.finger_pose(i, &s.state.q);
            let c = fingertip_contact(
                i,
                &pose.tip,
                model.tip_radius(),
                shape,
                &s.state,
                cfg.contact_tolerance,
            );
            flags[i] = c.active;
            let jac = HandModel::point_jacobian(&pose, &c.point);
            let spring = cfg.contact_stiffness * c.depth;
            // Servo torque plus the contact spring pushing the finger back.
            let reaction = -spring * c.normal;
            let ext = jac.transpose() * reaction;
            for j in 0..2 {
                let k = 2 * i + j;
                let tau = cfg.servo_gain * (s.setpoints[k] - s.state.q[k]) + ext[j];
                qdot[k] = (tau / cfg.joint_damping).clamp(-cfg.velocity_limit, cfg.velocity_limit);
            }
            if c.depth > 0.0 {
                let lever = c.point - center;
                let finger_velocity = jac * Vector2::new(qdot[2 * i], qdot[2 * i + 1]);
                let object_velocity = v + omega * perp(lever);
                let rate = (finger_velocity - object_velocity).dot(&c.normal);
                let fn_ = (spring + cfg.contact_damping * rate).max(0.0);
                scratch[i] = ContactScratch {
                    active: fn_ > 0.0,
                    normal: c.normal,
                    lever,
                    finger_velocity,
                    normal_force: fn_,
                    sliding: false,
                    tangential: Vector2::zeros(),
                };
            }
        }

        // Object update: explicit normal forces and gravity, implicit
        // tangential drag on sticking contacts.
        let mass = Matrix3::new(cfg.mass, 0.0, 0.0, 0.0, cfg.mass, 0.0, 0.0, 0.0, cfg.inertia);
        let momentum = mass * Vector3::new(v.x, v.y, omega);
        let mut explicit = Vector3::new(0.0, -cfg.mass * cfg.gravity, 0.0);
        for c in scratch[..m].iter().filter(|c| c.active) {
            let f = c.normal_force * c.normal;
            explicit += Vector3::new(f.x, f.y, crate::hand::cross(&c.lever, &f));
        }
        let kt = cfg.tangential_viscosity;
        let mut twist = Vector3::zeros();
        for _ in 0..=m {
            let mut lhs = mass;
            let mut rhs = momentum + dt * explicit;
            for c in scratch[..m].iter().filter(|c| c.active) {
                if c.sliding {
                    let f = c.tangential;
                    rhs += dt * Vector3::new(f.x, f.y, crate::hand::cross(&c.lever, &f));
                    continue;
                }
                // f_t = kt T (v_f - B V), T = I - n n^T, B = [I | perp(r)]
                let t = nalgebra::Matrix2::identity() - c.normal * c.normal.transpose();
                let b = nalgebra::Matrix2x3::new(1.0, 0.0, -c.lever.y, 0.0, 1.0, c.lever.x);
                let btt = b.transpose() * t;
                lhs += dt * kt * btt * b;
                rhs += dt * kt * btt * c.finger_velocity;
            }
            twist = lhs.lu().solve(&rhs).unwrap_or(Vector3::zeros());
            let mut changed = false;
            for c in scratch[..m].iter_mut().filter(|c| c.active && !c.sliding) {
                let rel = c.finger_velocity - (Vector2::new(twist.x, twist.y) + twist.z * perp(c.lever));
                let ft = kt * (rel - c.normal * c.normal.dot(&rel));
                let cap = cfg.friction * c.normal_force;
                let norm = ft.norm();
                if norm > cap {
                    c.sliding = true;
                    c.tangential = if norm > 0.0 { ft * (cap / norm) } else { ft };
                    changed = true;
                } else {
                    c.tangential = ft;
                }
            }
            if !changed {
                break;
            }
        }

        if let Some(info) = info {
            info.forces.clear();
            info.contacts.clear();
            for i in 0..m {
                let c = &scratch[i];
                let f = if c.active {
                    c.normal_force * c.normal + c.tangential
                } else {
                    Vector2::zeros()
                };
                info.forces.push([f.x, f.y]);
                info.contacts.push(flags[i]);
            }
        }

        s.velocity = [twist.x, twist.y, twist.z];
        s.state.pose.x += twist.x * dt;
        s.state.pose.y += twist.y * dt;
        s.state.pose.theta += twist.z * dt;
        for (q, qd) in s.state.q.iter_mut().zip(&qdot[..2 * m]) {
            *q += qd * dt;
        }
        model.clamp_joints(&mut s.state.q);
    }
}


impl Simulator {
    /// All fingertips touching the object at the origin with servo
    /// setpoints `squeeze` meters inside the surface, then settled for
    /// `settle_time` seconds with the setpoints held.
    pub fn canonical_grasp(&self, squeeze: f64, settle_time: f64) -> Result<SimState> {
        let model = self.model();
        let shape = self.shape();
        let pose = crate::hand::Pose2::default();
        let q = crate::hand::touching_configuration(model, shape, pose, 0.0)
            .ok_or_else(|| Error::Setup("fingers cannot reach the object".into()))?;
        let setpoints = crate::hand::touching_configuration(model, shape, pose, -squeeze)
            .ok_or_else(|| Error::Setup("fingers cannot reach the object".into()))?;
        let mut s = SimState {
            state: State::new(q, pose),
            velocity: [0.0; 3],
            setpoints,
        };
        let steps = (settle_time / self.config().dt).round() as usize;
        for _ in 0..steps {
            self.advance(&mut s, None);
        }
        Ok(s)
    }
}

impl Simulator {
    /// The contact report a step from `s` would produce, without keeping
    /// the step.
    pub fn probe(&self, s: &SimState) -> StepInfo {
        let mut scratch = s.clone();
        let mut info = StepInfo::default();
        self.advance(&mut scratch, Some(&mut info));
        info
    }
}
