//! The finger-gaiting task: observations, reward and termination on top of
//! the simulator.

use crate::error::{Error, Result};
use crate::sim::{Action, SimState, Simulator, StepInfo};

#[derive(Clone, Debug, PartialEq)]
pub struct RewardConfig {
    pub w_rot: f64,
    /// Angular-velocity clip (rad / s).
    pub omega_max: f64,
    /// Weight of the object translational speed penalty.
    pub w_v: f64,
    /// Weight of the distance from the episode's start position.
    pub w_pos: f64,
    /// Contacts needed for the rotation term.
    pub reward_contacts: usize,
    /// Episodes end below this many contacts.
    pub min_contacts: usize,
    /// Policy steps per episode.
    pub horizon: usize,
    /// A finger reports contact when its contact force exceeds this (N).
    pub contact_threshold: f64,
    /// Setpoint change per unit action (rad).
    pub action_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_rot: 1.0,
            omega_max: 1.0,
            w_v: 0.3,
            w_pos: 1.0,
            reward_contacts: 3,
            min_contacts: 2,
            horizon: 200,
            contact_threshold: 0.0,
            action_scale: 0.15,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_rot, self.w_v, self.w_pos, self.contact_threshold];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("reward weights must be non-negative".into()));
        }
        if !(self.omega_max > 0.0) || !(self.action_scale > 0.0) {
            return Err(Error::Config("reward.omega_max and reward.action_scale must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("reward.horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// What the actor sees: joint positions, setpoints and binary contact
/// flags. There is deliberately no object pose in here.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub q: Vec<f64>,
    pub setpoints: Vec<f64>,
    pub contacts: Vec<bool>,
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.setpoints);
        v.extend(self.contacts.iter().map(|&c| if c { 1.0 } else { 0.0 }));
        v
    }

    pub fn contact_count(&self) -> usize {
        self.contacts.iter().filter(|&&c| c).count()
    }
}

/// The critic additionally sees the object pose and twist and the net
/// fingertip forces.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticObservation {
    pub obs: Observation,
    pub pose: [f64; 3],
    pub velocity: [f64; 3],
    pub forces: Vec<[f64; 2]>,
}

// Rough input scales so every critic feature is order one.
const POSITION_SCALE: f64 = 0.02;
const FORCE_SCALE: f64 = 5.0;

impl CriticObservation {
    /// The angle enters as `(sin, cos)`, positions and forces rescaled.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.obs.to_vec();
        v.push(self.pose[0] / POSITION_SCALE);
        v.push(self.pose[1] / POSITION_SCALE);
        v.push(self.pose[2].sin());
        v.push(self.pose[2].cos());
        v.extend_from_slice(&self.velocity);
        for f in &self.forces {
            v.push(f[0] / FORCE_SCALE);
            v.push(f[1] / FORCE_SCALE);
        }
        v
    }
}

pub fn obs_dim(fingers: usize) -> usize {
    2 * 2 * fingers + fingers
}

pub fn critic_obs_dim(fingers: usize) -> usize {
    obs_dim(fingers) + 4 + 3 + 2 * fingers
}

pub fn observe(s: &SimState, info: &StepInfo, cfg: &RewardConfig) -> Observation {
    Observation {
        q: s.state.q.clone(),
        setpoints: s.setpoints.clone(),
        contacts: (0..info.forces.len())
            .map(|i| info.force_magnitude(i) > cfg.contact_threshold)
            .collect(),
    }
}

pub fn observe_critic(s: &SimState, info: &StepInfo, cfg: &RewardConfig) -> CriticObservation {
    let p = &s.state.pose;
    CriticObservation {
        obs: observe(s, info, cfg),
        pose: [p.x, p.y, p.theta],
        velocity: s.velocity,
        forces: info.forces.clone(),
    }
}

/// `w_rot clip(omega) [contacts >= reward_contacts] - w_v |v| - w_pos |p - p0|`
/// with `omega` the finite-difference angular rate over one control
/// interval `dt_control`.
pub fn reward(
    prev: &SimState,
    next: &SimState,
    contacts: usize,
    start: [f64; 2],
    dt_control: f64,
    cfg: &RewardConfig,
) -> f64 {
    let omega = (next.state.pose.theta - prev.state.pose.theta) / dt_control;
    let rot = if contacts >= cfg.reward_contacts {
        cfg.w_rot * omega.clamp(-cfg.omega_max, cfg.omega_max)
    } else {
        0.0
    };
    let speed = next.velocity[0].hypot(next.velocity[1]);
    let offset = (next.state.pose.x - start[0]).hypot(next.state.pose.y - start[1]);
    rot - cfg.w_v * speed - cfg.w_pos * offset
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Contacts,
    Dropped,
    Horizon,
}

pub fn terminate(
    sim: &Simulator,
    s: &SimState,
    contacts: usize,
    steps: usize,
    cfg: &RewardConfig,
) -> Option<Termination> {
    if sim.is_dropped(s) || !s.is_finite() {
        Some(Termination::Dropped)
    } else if contacts < cfg.min_contacts {
        Some(Termination::Contacts)
    } else if steps >= cfg.horizon {
        Some(Termination::Horizon)
    } else {
        None
    }
}

/// Result of one policy step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub done: Option<Termination>,
    /// Object angle change over the step (rad).
    pub rotation: f64,
}

/// One episode in progress.
#[derive(Clone)]
pub struct Env {
    pub sim: Simulator,
    pub cfg: RewardConfig,
    pub state: SimState,
    pub info: StepInfo,
    pub steps: usize,
    start: [f64; 2],
    start_theta: f64,
}

impl Env {
    pub fn new(sim: Simulator, cfg: RewardConfig, start: SimState) -> Self {
        let info = sim.probe(&start);
        let p = start.state.pose;
        Self {
            sim,
            cfg,
            state: start,
            info,
            steps: 0,
            start: [p.x, p.y],
            start_theta: p.theta,
        }
    }

    pub fn reset(&mut self, start: SimState) {
        *self = Self::new(self.sim.clone(), self.cfg.clone(), start);
    }

    pub fn observation(&self) -> Observation {
        observe(&self.state, &self.info, &self.cfg)
    }

    pub fn critic_observation(&self) -> CriticObservation {
        observe_critic(&self.state, &self.info, &self.cfg)
    }

    /// Rotation accumulated since the episode started.
    pub fn episode_rotation(&self) -> f64 {
        self.state.state.pose.theta - self.start_theta
    }

    /// Applies a unit-scale action: each component is clipped to `[-1, 1]`
    /// and moves its setpoint by `action_scale` times that.
    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let setpoints: Vec<f64> = self
            .state
            .setpoints
            .iter()
            .zip(action)
            .map(|(s, a)| s + self.cfg.action_scale * a.clamp(-1.0, 1.0))
            .collect();
        let prev = self.state.clone();
        self.info = self.sim.control(&mut self.state, &Action(setpoints))?;
        self.steps += 1;
        let contacts = self.observation().contact_count();
        let dt = self.sim.config().control_interval();
        let r = reward(&prev, &self.state, contacts, self.start, dt, &self.cfg);
        Ok(Transition {
            reward: r,
            done: terminate(&self.sim, &self.state, contacts, self.steps, &self.cfg),
            rotation: self.state.state.pose.theta - prev.state.pose.theta,
        })
    }
}
