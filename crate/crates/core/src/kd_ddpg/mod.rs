//! Distillation-initialized DDPG.
//!
//! The actor is first fit to Markowitz teacher allocations, then refined off-policy with a
//! replay buffer, target networks and exploration noise injected into the actor's logits.

mod agent;
mod noise;
mod replay;
mod train;

pub use agent::{
    act, actor_objective_and_gradient, critic_input, critic_loss_and_gradient, critic_targets, soft_update,
    update_actor, update_critic, ActorPolicy, AgentCheckpoint, AGENT_VERSION,
};
pub use noise::ExplorationNoise;
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    continue_training, dataset_mse, distill_pretrain, evaluate, init_agent, read_episode_log, save_episode_log,
    train, write_episode_log, EpisodeLog, TrainOutcome, EPISODE_LOG_HEADER,
};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistillLoss {
    /// Squared error between simplex outputs and teacher weights.
    Mse,
    /// Temperature-softened cross-entropy on logits, teacher logits `ln(max(w, 1e-8))`.
    Kd,
}

impl FromStr for DistillLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "kd" => Ok(Self::Kd),
            other => Err(Error::Config(format!("unknown distillation loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub enabled: bool,
    pub loss: DistillLoss,
    pub temperature: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            loss: DistillLoss::Mse,
            temperature: 2.0,
            lambda: 0.5,
            epochs: 200,
            lr: 1e-3,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseConfig {
    OrnsteinUhlenbeck { theta: f64, sigma: f64, dt: f64 },
    Gaussian { sigma: f64 },
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseConfig::OrnsteinUhlenbeck { theta, sigma, dt } => theta >= 0.0 && sigma >= 0.0 && dt > 0.0,
            NoiseConfig::Gaussian { sigma } => sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid noise parameters {self:?}: need theta >= 0, sigma >= 0, dt > 0"
            )))
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::OrnsteinUhlenbeck {
            theta: 0.15,
            sigma: 0.2,
            dt: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise: NoiseConfig,
    pub distill: DistillConfig,
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Rewards are multiplied by this before entering the replay buffer.
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 64,
            episodes: 20,
            buffer_capacity: 100_000,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise: NoiseConfig::default(),
            distill: DistillConfig::default(),
            hidden: vec![64, 64],
            hidden_activation: Activation::Relu,
            reward_scale: 100.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail(format!(
                "need 0 < batch_size <= buffer_capacity, got {} and {}",
                self.batch_size, self.buffer_capacity
            ));
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0 && self.distill.lr >= 0.0) {
            return fail("learning rates must be non-negative".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if !(self.reward_scale > 0.0) || !self.reward_scale.is_finite() {
            return fail("reward_scale must be positive".into());
        }
        if !(self.distill.temperature > 0.0) || !(self.distill.lambda >= 0.0) || self.distill.batch_size == 0 {
            return fail("distillation needs temperature > 0, lambda >= 0, batch_size >= 1".into());
        }
        self.noise.validate()?;
        Ok(())
    }

    pub fn actor_sizes(&self, state_dim: usize, n_assets: usize) -> Vec<usize> {
        let mut sizes = vec![state_dim];
        sizes.extend(&self.hidden);
        sizes.push(n_assets);
        sizes
    }

    pub fn critic_sizes(&self, state_dim: usize, n_assets: usize) -> Vec<usize> {
        let mut sizes = vec![state_dim + n_assets];
        sizes.extend(&self.hidden);
        sizes.push(1);
        sizes
    }
}
