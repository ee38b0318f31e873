//! Rollout collection, the training loop, evaluation and checkpoints.

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{Env, RewardConfig, Termination};
use super::nn::Adam;
use super::policy::PolicyParams;
use super::ppo::{gae, update_policy, Batch, PpoConfig, StepEnd, UpdateStats};
use super::reset::ResetDistribution;
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_EVAL, TAG_INIT, TAG_MINIBATCH, TAG_POLICY, TAG_RESET};
use crate::sim::{SimState, Simulator};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub updates: usize,
    /// Environment (policy) steps per update, split evenly over `n_envs`.
    pub steps_per_update: usize,
    pub n_envs: usize,
    pub hidden: usize,
    pub init_log_std: f64,
    pub ppo: PpoConfig,
    pub reward: RewardConfig,
    /// Evaluate every this many updates (and after the last one); zero
    /// disables periodic evaluation.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Setpoint perturbation of evaluation starts after the first (rad).
    pub eval_noise: f64,
    pub explored_capacity: usize,
    pub explored_initial_prob: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            updates: 300,
            steps_per_update: 4096,
            n_envs: 16,
            hidden: 64,
            init_log_std: -0.5,
            ppo: PpoConfig::default(),
            reward: RewardConfig::default(),
            eval_every: 25,
            eval_episodes: 5,
            eval_noise: 0.02,
            explored_capacity: 50_000,
            explored_initial_prob: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.reward.validate()?;
        if self.n_envs == 0 || self.hidden == 0 {
            return Err(Error::Config("train.n_envs and train.hidden must be positive".into()));
        }
        if self.steps_per_update % self.n_envs != 0 {
            return Err(Error::Config(
                "train.steps_per_update must be a multiple of train.n_envs".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.explored_initial_prob) {
            return Err(Error::Config("train.explored_initial_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A finished training episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub reward: f64,
    pub rotation: f64,
    pub length: usize,
    pub end: Termination,
}

/// Output of [`collect_rollouts`].
#[derive(Clone, Debug, Default)]
pub struct Rollout {
    pub batch: Batch,
    pub episodes: Vec<EpisodeStats>,
    /// Non-terminal states reached by the rollouts, in environment order.
    pub visited: Vec<SimState>,
}

/// An environment plus the running totals of its current episode.
#[derive(Clone)]
pub struct EnvSlot {
    pub env: Env,
    reward: f64,
}

impl EnvSlot {
    pub fn new(env: Env) -> Self {
        Self { env, reward: 0.0 }
    }
}

/// Runs `steps` policy steps in every environment with frozen `params`.
/// Each environment draws actions and resets from its own streams tagged
/// with `(update, env index)`, so the result does not depend on how the
/// environments are scheduled.
pub fn collect_rollouts(
    params: &PolicyParams,
    slots: &mut [EnvSlot],
    dist: &ResetDistribution,
    steps: usize,
    ppo: &PpoConfig,
    seed: u64,
    update: usize,
) -> Result<Rollout> {
    let keep_visits = dist.wants_visits();
    let parts: Vec<Result<Rollout>> = slots
        .par_iter_mut()
        .enumerate()
        .map(|(e, slot)| {
            let mut act_rng = stream(seed, &[TAG_POLICY, update as u64, e as u64]);
            let mut reset_rng = stream(seed, &[TAG_RESET, update as u64, e as u64]);
            let mut out = Rollout::default();
            let mut rewards = Vec::with_capacity(steps);
            let mut ends = Vec::with_capacity(steps);
            for t in 0..steps {
                let obs = slot.env.observation().to_vec();
                let cobs = slot.env.critic_observation().to_vec();
                let (action, lp) = params.act(&obs, &mut act_rng);
                let value = params.value(&cobs);
                let tr = slot.env.step(&action)?;
                slot.reward += tr.reward;
                out.batch.obs.push(obs);
                out.batch.critic_obs.push(cobs);
                out.batch.actions.push(action);
                out.batch.log_probs.push(lp);
                out.batch.values.push(value);
                rewards.push(tr.reward);
                match tr.done {
                    Some(end) => {
                        ends.push(match end {
                            Termination::Horizon => {
                                StepEnd::Cut(params.value(&slot.env.critic_observation().to_vec()))
                            }
                            _ => StepEnd::Terminal,
                        });
                        out.episodes.push(EpisodeStats {
                            reward: slot.reward,
                            rotation: slot.env.episode_rotation(),
                            length: slot.env.steps,
                            end,
                        });
                        slot.reward = 0.0;
                        let start = dist.sample(&slot.env.sim, &mut reset_rng)?;
                        slot.env.reset(start);
                    }
                    None => {
                        if keep_visits {
                            out.visited.push(slot.env.state.clone());
                        }
                        ends.push(if t + 1 == steps {
                            StepEnd::Cut(params.value(&slot.env.critic_observation().to_vec()))
                        } else {
                            StepEnd::Continue
                        });
                    }
                }
            }
            let (adv, ret) = gae(&rewards, &out.batch.values, &ends, ppo.gamma, ppo.lambda);
            out.batch.advantages = adv;
            out.batch.returns = ret;
            Ok(out)
        })
        .collect();
    let mut all = Rollout::default();
    for p in parts {
        let p = p?;
        all.batch.extend(p.batch);
        all.episodes.extend(p.episodes);
        all.visited.extend(p.visited);
    }
    Ok(all)
}

/// One evaluation episode with the mean action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalEpisode {
    /// Signed object rotation over the episode (rad).
    pub rotation: f64,
    pub revolutions: f64,
    pub length: usize,
    /// Rotation per second of simulated time (rad / s).
    pub mean_speed: f64,
    pub end: Termination,
}

/// Runs `env` to termination with actions from `controller`.
pub fn run_episode<F>(env: &mut Env, mut controller: F) -> Result<EvalEpisode>
where
    F: FnMut(&Env) -> Vec<f64>,
{
    loop {
        let a = controller(env);
        if let Some(end) = env.step(&a)?.done {
            let rotation = env.episode_rotation();
            let time = env.steps as f64 * env.sim.config().control_interval();
            return Ok(EvalEpisode {
                rotation,
                revolutions: rotation / std::f64::consts::TAU,
                length: env.steps,
                mean_speed: rotation / time,
                end,
            });
        }
    }
}

/// Runs the deterministic policy from each start until termination.
pub fn evaluate(
    params: &PolicyParams,
    sim: &Simulator,
    reward: &RewardConfig,
    starts: &[SimState],
) -> Result<Vec<EvalEpisode>> {
    starts
        .par_iter()
        .map(|s| {
            let mut env = Env::new(sim.instance(), reward.clone(), s.clone());
            run_episode(&mut env, |e| params.mean(&e.observation().to_vec()))
        })
        .collect()
}

/// Evaluation starts: `initial` itself, then copies with setpoints
/// perturbed uniformly by up to `noise`.
pub fn eval_starts(sim: &Simulator, initial: &SimState, n: usize, noise: f64, seed: u64) -> Vec<SimState> {
    let mut rng = stream(seed, &[TAG_EVAL]);
    (0..n)
        .map(|i| {
            let mut s = initial.clone();
            if i > 0 && noise > 0.0 {
                for v in &mut s.setpoints {
                    *v += rng.gen_range(-noise..=noise);
                }
                sim.model().clamp_joints(&mut s.setpoints);
            }
            s
        })
        .collect()
}

/// Metrics of one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateRecord {
    pub update: usize,
    pub env_steps: usize,
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_rotation: f64,
    pub mean_length: f64,
    pub stats: UpdateStats,
}

/// Evaluation summary after some update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRecord {
    pub update: usize,
    pub env_steps: usize,
    pub mean_rotation: f64,
    pub median_revolutions: f64,
    pub mean_length: f64,
}

pub fn summarize(update: usize, env_steps: usize, eps: &[EvalEpisode]) -> EvalRecord {
    let n = eps.len().max(1) as f64;
    let mut revs: Vec<f64> = eps.iter().map(|e| e.revolutions).collect();
    revs.sort_by(f64::total_cmp);
    let median = match revs.len() {
        0 => f64::NAN,
        l if l % 2 == 1 => revs[l / 2],
        l => 0.5 * (revs[l / 2 - 1] + revs[l / 2]),
    };
    EvalRecord {
        update,
        env_steps,
        mean_rotation: eps.iter().map(|e| e.rotation).sum::<f64>() / n,
        median_revolutions: median,
        mean_length: eps.iter().map(|e| e.length as f64).sum::<f64>() / n,
    }
}

/// Training state for one run.
pub struct Trainer {
    pub sim: Simulator,
    pub cfg: TrainConfig,
    pub params: PolicyParams,
    pub opt: Adam,
    pub dist: ResetDistribution,
    pub initial: SimState,
    slots: Vec<EnvSlot>,
    pub update: usize,
    pub env_steps: usize,
    eval_set: Vec<SimState>,
}

impl Trainer {
    /// `initial` is the fixed start used for evaluation.
    pub fn new(sim: Simulator, cfg: TrainConfig, dist: ResetDistribution, initial: SimState) -> Result<Self> {
        cfg.validate()?;
        let fingers = sim.model().num_fingers();
        let mut rng = stream(cfg.seed, &[TAG_INIT]);
        let params = PolicyParams::new(fingers, cfg.hidden, cfg.init_log_std, &mut rng);
        let opt = Adam::new(params.len(), cfg.ppo.lr);
        let slots = (0..cfg.n_envs)
            .map(|e| {
                let mut r = stream(cfg.seed, &[TAG_INIT, e as u64 + 1]);
                let start = dist.sample(&sim, &mut r)?;
                Ok(EnvSlot::new(Env::new(sim.instance(), cfg.reward.clone(), start)))
            })
            .collect::<Result<Vec<_>>>()?;
        let eval_set = eval_starts(&sim, &initial, cfg.eval_episodes, cfg.eval_noise, cfg.seed);
        Ok(Self {
            sim,
            cfg,
            params,
            opt,
            dist,
            initial,
            slots,
            update: 0,
            env_steps: 0,
            eval_set,
        })
    }

    /// Collects one batch and updates the policy.
    pub fn step(&mut self) -> Result<UpdateRecord> {
        let per_env = self.cfg.steps_per_update / self.cfg.n_envs;
        let roll = collect_rollouts(
            &self.params,
            &mut self.slots,
            &self.dist,
            per_env,
            &self.cfg.ppo,
            self.cfg.seed,
            self.update,
        )?;
        let mut rng = stream(self.cfg.seed, &[TAG_MINIBATCH, self.update as u64]);
        self.dist.record(roll.visited, &mut rng);
        let stats = if roll.batch.is_empty() {
            UpdateStats::default()
        } else {
            update_policy(&mut self.params, &mut self.opt, &roll.batch, &self.cfg.ppo, &mut rng)?
        };
        self.update += 1;
        self.env_steps += roll.batch.len();
        let n = roll.episodes.len();
        let mean = |f: &dyn Fn(&EpisodeStats) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                roll.episodes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Ok(UpdateRecord {
            update: self.update,
            env_steps: self.env_steps,
            episodes: n,
            mean_reward: mean(&|e| e.reward),
            mean_rotation: mean(&|e| e.rotation),
            mean_length: mean(&|e| e.length as f64),
            stats,
        })
    }

    pub fn evaluate(&self) -> Result<Vec<EvalEpisode>> {
        evaluate(&self.params, &self.sim, &self.cfg.reward, &self.eval_set)
    }

    pub fn eval_due(&self) -> bool {
        let e = self.cfg.eval_every;
        self.update == self.cfg.updates || (e > 0 && self.update % e == 0)
    }

    pub fn checkpoint(&self, config_sha256: &str) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            config_sha256: config_sha256.into(),
            seed: self.cfg.seed,
            update: self.update,
            params: self.params.clone(),
        }
    }
}

pub const CHECKPOINT_FORMAT: &str = "dexplore-checkpoint";

/// Serialized policy parameters, tied to the config that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub update: usize,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if c.format != CHECKPOINT_FORMAT || c.version != 1 {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        Ok(c)
    }

    /// Fails unless the checkpoint was produced under `config_sha256`.
    pub fn expect_config(&self, config_sha256: &str) -> Result<()> {
        if self.config_sha256 == config_sha256 {
            Ok(())
        } else {
            Err(Error::HashMismatch {
                checkpoint: self.config_sha256.clone(),
                config: config_sha256.into(),
            })
        }
    }
}
