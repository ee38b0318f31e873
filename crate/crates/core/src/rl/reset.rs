//! Start-state distributions for training episodes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hand::{place_fingertip, Pose2, State};
use crate::resets::ResetSet;
use crate::sim::{SimState, Simulator};

/// Rejection sampler for random stable grasps.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspSampler {
    pub max_attempts: usize,
    /// Setpoints are placed this far inside the surface (m).
    pub squeeze: f64,
    pub min_contacts: usize,
}

impl Default for GraspSampler {
    fn default() -> Self {
        Self {
            max_attempts: 1000,
            squeeze: 0.002,
            min_contacts: 3,
        }
    }
}

impl GraspSampler {
    /// One candidate: random object angle and random joint angles, then
    /// every finger that can reach the surface is closed onto it.
    fn propose<R: Rng + ?Sized>(&self, sim: &Simulator, rng: &mut R) -> SimState {
        let model = sim.model();
        let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pose = Pose2::new(0.0, 0.0, theta);
        let mut q: Vec<f64> = model
            .lower_limits()
            .into_iter()
            .zip(model.upper_limits())
            .map(|(lo, hi)| rng.gen_range(lo..=hi))
            .collect();
        let mut setpoints = q.clone();
        for f in 0..model.num_fingers() {
            let start = State::new(q.clone(), pose);
            let r = model.joint_range(f);
            if let Some([a, b]) = place_fingertip(model, sim.shape(), &start, f, 0.0, 1e-7, 100) {
                q[r.start] = a;
                q[r.start + 1] = b;
                let touching = State::new(q.clone(), pose);
                if let Some([c, d]) =
                    place_fingertip(model, sim.shape(), &touching, f, -self.squeeze, 1e-7, 100)
                {
                    setpoints[r.start] = c;
                    setpoints[r.start + 1] = d;
                } else {
                    setpoints[r.start] = a;
                    setpoints[r.start + 1] = b;
                }
            }
        }
        model.clamp_joints(&mut setpoints);
        SimState {
            state: State::new(q, pose),
            velocity: [0.0; 3],
            setpoints,
        }
    }

    /// Draws until a proposal has enough contacts and survives the rollout
    /// check. Returns the state and the number of proposals used.
    pub fn sample<R: Rng + ?Sized>(&self, sim: &Simulator, rng: &mut R) -> Result<(SimState, usize)> {
        for attempt in 1..=self.max_attempts {
            let s = self.propose(sim, rng);
            if sim.contacts(&s.state).count() >= self.min_contacts && sim.rollout_stability_check(&s) {
                return Ok((s, attempt));
            }
        }
        Err(Error::SamplerExhausted(self.max_attempts))
    }

    /// Fraction of rejected proposals over `draws` successful samples.
    pub fn rejection_rate<R: Rng + ?Sized>(
        &self,
        sim: &Simulator,
        draws: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let mut proposals = 0;
        for _ in 0..draws {
            proposals += self.sample(sim, rng)?.1;
        }
        Ok(1.0 - draws as f64 / proposals as f64)
    }
}

/// States some rollout visited, kept up to a capacity by reservoir
/// sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ExploredBuffer {
    pub states: Vec<SimState>,
    pub capacity: usize,
    seen: u64,
}

impl ExploredBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            states: Vec::new(),
            capacity,
            seen: 0,
        }
    }

    pub fn insert<R: Rng + ?Sized>(&mut self, s: SimState, rng: &mut R) {
        self.seen += 1;
        if self.states.len() < self.capacity {
            self.states.push(s);
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.states[j as usize] = s;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum ResetDistribution {
    /// Every episode starts from the same state.
    FixedInit(SimState),
    /// Random grasps by rejection sampling.
    StableGraspSampler(GraspSampler),
    /// Uniform over visited non-terminal states, mixed with the initial
    /// state with probability `initial_prob`.
    ExploredRestarts {
        initial: SimState,
        buffer: ExploredBuffer,
        initial_prob: f64,
    },
    /// Uniform over a reset set extracted from an exploration tree.
    TreeResets(ResetSet),
}

impl ResetDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedInit(_) => "fi",
            Self::StableGraspSampler(_) => "sgs",
            Self::ExploredRestarts { .. } => "er",
            Self::TreeResets(_) => "tree",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, sim: &Simulator, rng: &mut R) -> Result<SimState> {
        match self {
            Self::FixedInit(s) => Ok(s.clone()),
            Self::StableGraspSampler(g) => g.sample(sim, rng).map(|(s, _)| s),
            Self::ExploredRestarts {
                initial,
                buffer,
                initial_prob,
            } => {
                if buffer.states.is_empty() || rng.gen_bool(*initial_prob) {
                    Ok(initial.clone())
                } else {
                    Ok(buffer.states[rng.gen_range(0..buffer.states.len())].clone())
                }
            }
            Self::TreeResets(set) => {
                if set.is_empty() {
                    return Err(Error::EmptyResetSet);
                }
                Ok(set.sample(rng).clone())
            }
        }
    }

    /// Feeds visited non-terminal states to an explored-restarts buffer;
    /// no-op for the other variants.
    pub fn record<R: Rng + ?Sized>(&mut self, visited: Vec<SimState>, rng: &mut R) {
        if let Self::ExploredRestarts { buffer, .. } = self {
            for s in visited {
                buffer.insert(s, rng);
            }
        }
    }

    pub fn wants_visits(&self) -> bool {
        matches!(self, Self::ExploredRestarts { .. })
    }
}
