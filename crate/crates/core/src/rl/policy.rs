//! Gaussian actor and asymmetric critic.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::env::{critic_obs_dim, obs_dim};
use super::nn::{Mlp, Tape};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
const HALF_LOG_TAU: f64 = 0.918_938_533_204_672_7;

/// Actor mean network, state-independent log standard deviations, and the
/// critic. Flat parameter vectors are laid out `[actor | log_std | critic]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(fingers: usize, hidden: usize, init_log_std: f64, rng: &mut R) -> Self {
        let d = 2 * fingers;
        Self::with_sizes(
            &[obs_dim(fingers), hidden, hidden, d],
            &[critic_obs_dim(fingers), hidden, hidden, 1],
            init_log_std,
            rng,
        )
    }

    pub fn with_sizes<R: Rng + ?Sized>(
        actor: &[usize],
        critic: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        let actor_net = Mlp::new(actor, 1.0, 0.01, rng);
        let critic_net = Mlp::new(critic, 1.0, 1.0, rng);
        Self {
            log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); actor_net.output_dim()],
            actor: actor_net,
            critic: critic_net,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn len(&self) -> usize {
        self.actor.params.len() + self.log_std.len() + self.critic.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.actor.params.clone();
        v.extend_from_slice(&self.log_std);
        v.extend_from_slice(&self.critic.params);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let a = self.actor.params.len();
        let l = self.log_std.len();
        self.actor.params.copy_from_slice(&v[..a]);
        self.log_std.copy_from_slice(&v[a..a + l]);
        self.critic.params.copy_from_slice(&v[a + l..]);
    }

    /// Slices of a flat gradient: `(actor, log_std, critic)`.
    pub fn split_mut<'a>(&self, g: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64]) {
        let a = self.actor.params.len();
        let l = self.log_std.len();
        let (actor, rest) = g.split_at_mut(a);
        let (log_std, critic) = rest.split_at_mut(l);
        (actor, log_std, critic)
    }

    pub fn clamp_log_std(&mut self) {
        for v in &mut self.log_std {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    pub fn mean(&self, obs: &[f64]) -> Vec<f64> {
        self.actor.eval(obs)
    }

    pub fn mean_tape(&self, obs: &[f64]) -> Tape {
        self.actor.forward(obs)
    }

    pub fn value(&self, critic_obs: &[f64]) -> f64 {
        self.critic.eval(critic_obs)[0]
    }

    /// Samples an action; returns it with its log-density.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let mean = self.mean(obs);
        let a: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = log_prob(&mean, &self.log_std, &a);
        (a, lp)
    }

    /// Differential entropy of the action distribution.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_TAU).sum()
    }
}

/// Diagonal Gaussian log-density.
pub fn log_prob(mean: &[f64], log_std: &[f64], a: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(a)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LOG_TAU
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut rng = crate::rng::stream(1, &[]);
        let p = PolicyParams::new(3, 8, -0.5, &mut rng);
        let mut q = PolicyParams::new(3, 8, 0.0, &mut rng);
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
        assert_eq!(p.len(), p.to_flat().len());
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let lp = log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp + HALF_LOG_TAU).abs() < 1e-15);
        assert!((HALF_LOG_TAU - 0.5 * std::f64::consts::TAU.ln()).abs() < 1e-15);
    }
}
