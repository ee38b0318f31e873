//! Reinforcement learning of the rotation task.

pub mod env;
pub mod gait;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod reset;
pub mod train;

pub use env::{
    critic_obs_dim, obs_dim, observe, observe_critic, reward, terminate, CriticObservation, Env,
    Observation, RewardConfig, Termination, Transition,
};
pub use gait::ScriptedGait;
pub use nn::{Adam, Mlp};
pub use policy::PolicyParams;
pub use ppo::{gae, gradient_check, ppo_loss, update_policy, Batch, PpoConfig, StepEnd, UpdateStats};
pub use reset::{ExploredBuffer, GraspSampler, ResetDistribution};
pub use train::{
    collect_rollouts, eval_starts, evaluate, run_episode, summarize, Checkpoint, EnvSlot, EpisodeStats,
    EvalEpisode, EvalRecord, Rollout, TrainConfig, Trainer, UpdateRecord,
};
