//! Clipped-surrogate policy optimisation with generalized advantage
//! estimation.

use rand::seq::SliceRandom;
use rand::Rng;

use super::policy::{log_prob, PolicyParams};
use super::nn::Adam;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm clip; zero disables it.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            epochs: 4,
            minibatch: 512,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.lambda) || !(self.clip >= 0.0) {
            return Err(Error::Config("ppo: gamma and lambda must lie in [0, 1], clip >= 0".into()));
        }
        if !(self.lr > 0.0) || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::Config("ppo: lr, epochs and minibatch must be positive".into()));
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0 && self.max_grad_norm >= 0.0) {
            return Err(Error::Config("ppo: coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// How a recorded step ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepEnd {
    /// The episode continues with the next recorded step.
    Continue,
    /// Terminal: no value beyond this step.
    Terminal,
    /// The episode (or the recorded segment) was cut; bootstrap from the
    /// value of the following state.
    Cut(f64),
}

/// One update's worth of transitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub obs: Vec<Vec<f64>>,
    pub critic_obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn extend(&mut self, other: Batch) {
        self.obs.extend(other.obs);
        self.critic_obs.extend(other.critic_obs);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.values.extend(other.values);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }
}

/// GAE over one contiguous stream of steps. Returns `(advantages,
/// returns)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    ends: &[StepEnd],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = match ends[t] {
            StepEnd::Terminal => (0.0, 0.0),
            StepEnd::Cut(v) => (v, 0.0),
            StepEnd::Continue if t + 1 < n => (values[t + 1], next_adv),
            StepEnd::Continue => (0.0, 0.0),
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        adv[t] = delta + gamma * lambda * carry;
        next_adv = adv[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub actor: f64,
    pub critic: f64,
    pub entropy: f64,
    pub total: f64,
    /// Mean of `(r - 1) - ln r`, a non-negative KL estimate.
    pub kl: f64,
    pub clip_fraction: f64,
}

/// Loss over the samples `idx` (advantages used as stored). When `grad`
/// is given, the gradient of `total` is added to it.
pub fn ppo_loss(
    params: &PolicyParams,
    batch: &Batch,
    idx: &[usize],
    cfg: &PpoConfig,
    grad: Option<&mut [f64]>,
) -> LossParts {
    let want_grad = grad.is_some();
    let n = idx.len() as f64;
    let mut parts = LossParts::default();
    let sig: Vec<f64> = params.log_std.iter().map(|l| l.exp()).collect();
    let mut d_mean = vec![0.0; params.action_dim()];
    let mut d_log_std = vec![0.0; params.action_dim()];
    let mut actor_grad_buf = vec![0.0; params.actor.params.len()];
    let mut critic_grad_buf = vec![0.0; params.critic.params.len()];
    for &i in idx {
        let tape = params.mean_tape(&batch.obs[i]);
        let mean = tape.output();
        let a = &batch.actions[i];
        let lp = log_prob(mean, &params.log_std, a);
        let ratio = (lp - batch.log_probs[i]).exp();
        let adv = batch.advantages[i];
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let (unclipped_term, clipped_term) = (ratio * adv, clipped * adv);
        parts.actor -= unclipped_term.min(clipped_term) / n;
        parts.kl += ((ratio - 1.0) - (lp - batch.log_probs[i])) / n;
        // The gradient follows the unclipped branch when it is strictly
        // smaller, else the clipped branch, which is flat outside the
        // open interval.
        let inside = ratio > 1.0 - cfg.clip && ratio < 1.0 + cfg.clip;
        let active = unclipped_term < clipped_term || inside;
        if !inside {
            parts.clip_fraction += 1.0 / n;
        }

        let vtape = params.critic.forward(&batch.critic_obs[i]);
        let v = vtape.output()[0];
        let err = v - batch.returns[i];
        parts.critic += err * err / n;

        if want_grad {
            if active {
                // d(-ratio * adv / n) / d lp = -ratio * adv / n
                let coef = -ratio * adv / n;
                for j in 0..d_mean.len() {
                    let z = (a[j] - mean[j]) / sig[j];
                    d_mean[j] = coef * z / sig[j];
                    d_log_std[j] += coef * (z * z - 1.0);
                }
                params.actor.backward(&tape, &d_mean, &mut actor_grad_buf);
            }
            let dv = [cfg.value_coef * 2.0 * err / n];
            params.critic.backward(&vtape, &dv, &mut critic_grad_buf);
        }
    }
    parts.entropy = params.entropy();
    parts.total = parts.actor + cfg.value_coef * parts.critic - cfg.entropy_coef * parts.entropy;
    if let Some(g) = grad {
        let (ga, gl, gc) = params.split_mut(g);
        ga.iter_mut().zip(&actor_grad_buf).for_each(|(g, d)| *g += d);
        gc.iter_mut().zip(&critic_grad_buf).for_each(|(g, d)| *g += d);
        for (g, d) in gl.iter_mut().zip(&d_log_std) {
            // entropy term: d(-c_e * sum log_std) = -c_e
            *g += d - cfg.entropy_coef;
        }
    }
    parts
}

/// Diagnostics of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub explained_variance: f64,
}

/// `1 - Var(returns - values) / Var(returns)`.
pub fn explained_variance(values: &[f64], returns: &[f64]) -> f64 {
    let var = |v: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = v.collect();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
    };
    let vr = var(&mut returns.iter().copied());
    if vr <= 0.0 {
        return 0.0;
    }
    1.0 - var(&mut returns.iter().zip(values).map(|(r, v)| r - v)) / vr
}

/// Normalizes advantages to zero mean and unit variance in place.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.len() < 2 {
        return;
    }
    let m = adv.iter().sum::<f64>() / n;
    let s = (adv.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n).sqrt();
    for a in adv.iter_mut() {
        *a = (*a - m) / (s + 1e-8);
    }
}

/// Epochs of minibatch Adam steps on the PPO loss. Advantages are
/// normalized once per batch. A non-finite loss or gradient aborts the
/// update and leaves `params` untouched.
pub fn update_policy<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    opt: &mut Adam,
    batch: &Batch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::Config("policy update needs a non-empty batch".into()));
    }
    let mut batch = batch.clone();
    normalize_advantages(&mut batch.advantages);
    let backup = (params.clone(), opt.clone());
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = UpdateStats::default();
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(cfg.minibatch) {
            let mut grad = vec![0.0; params.len()];
            let parts = ppo_loss(params, &batch, idx, cfg, Some(&mut grad));
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                *params = backup.0;
                *opt = backup.1;
                return Err(Error::Diverged("non-finite PPO loss".into()));
            }
            if cfg.max_grad_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cfg.max_grad_norm {
                    let s = cfg.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            let mut flat = params.to_flat();
            opt.step(&mut flat, &grad);
            params.set_flat(&flat);
            params.clamp_log_std();
            stats.actor_loss += parts.actor;
            stats.critic_loss += parts.critic;
            stats.kl += parts.kl;
            stats.clip_fraction += parts.clip_fraction;
            count += 1.0;
        }
    }
    stats.actor_loss /= count;
    stats.critic_loss /= count;
    stats.kl /= count;
    stats.clip_fraction /= count;
    stats.entropy = params.entropy();
    stats.explained_variance = explained_variance(&batch.values, &batch.returns);
    Ok(stats)
}

/// Largest relative error between the analytic gradient of the PPO loss
/// over the whole batch and central differences, over `samples` randomly
/// chosen parameters.
pub fn gradient_check<R: Rng + ?Sized>(
    params: &PolicyParams,
    batch: &Batch,
    cfg: &PpoConfig,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let mut grad = vec![0.0; params.len()];
    ppo_loss(params, batch, &idx, cfg, Some(&mut grad));
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..samples {
        let k = rng.gen_range(0..base.len());
        let mut v = base.clone();
        v[k] = base[k] + h;
        probe.set_flat(&v);
        let up = ppo_loss(&probe, batch, &idx, cfg, None).total;
        v[k] = base[k] - h;
        probe.set_flat(&v);
        let down = ppo_loss(&probe, batch, &idx, cfg, None).total;
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grad[k].abs()).max(1e-6);
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    worst
}
