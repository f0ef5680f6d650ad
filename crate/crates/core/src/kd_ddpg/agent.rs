use std::path::Path;

use serde::{Deserialize, Serialize};

use super::replay::Transition;
use super::TrainConfig;
use crate::backtest_env::{EnvConfig, EnvState, Policy};
use crate::error::{Error, Result};
use crate::market_data::MarketPanel;
use crate::markowitz::WeightVector;
use crate::nn::{adam_step, softmax, AdamState, GradientSet, Mlp, MlpDoc, OutputHead};

pub const AGENT_VERSION: &str = "kdagent-1";

/// `[state, action]`, the critic's input layout.
pub fn critic_input(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

fn scalar(out: &[f64]) -> f64 {
    out[0]
}

/// Bootstrapped targets `r + gamma Q'(s', pi'(s'))`, with the bootstrap dropped on terminal
/// transitions.
pub fn critic_targets(batch: &[&Transition], target_actor: &Mlp, target_critic: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|tr| {
            if tr.done || gamma == 0.0 {
                return Ok(tr.reward);
            }
            let a = target_actor.predict(&tr.next_state)?;
            let q = scalar(&target_critic.predict(&critic_input(&tr.next_state, &a))?);
            Ok(tr.reward + gamma * q)
        })
        .collect()
}

/// Mean squared Bellman error over the batch and its parameter gradient.
pub fn critic_loss_and_gradient(critic: &Mlp, batch: &[&Transition], y: &[f64]) -> Result<(f64, GradientSet)> {
    if batch.len() != y.len() || batch.is_empty() {
        return Err(Error::Length(format!("{} transitions for {} targets", batch.len(), y.len())));
    }
    let n = batch.len() as f64;
    let mut grads = GradientSet::zeros_like(critic);
    let mut loss = 0.0;
    for (tr, yi) in batch.iter().zip(y) {
        let (out, cache) = critic.forward(&critic_input(&tr.state, tr.action.as_slice()))?;
        let err = scalar(&out) - yi;
        loss += err * err / n;
        let (g, _) = critic.backward(&cache, &[2.0 * err / n])?;
        grads.add_assign(&g);
    }
    Ok((loss, grads))
}

/// One Adam step on the critic; returns the pre-step loss.
pub fn update_critic(critic: &mut Mlp, batch: &[&Transition], y: &[f64], optimizer: &mut AdamState) -> Result<f64> {
    let (loss, grads) = critic_loss_and_gradient(critic, batch, y)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("critic loss became {loss}")));
    }
    adam_step(critic, &grads, optimizer)?;
    Ok(loss)
}

/// Mean `Q(s, pi(s))` over `states` and the gradient of its negative with respect to the
/// actor parameters (the action gradient of the critic chained through the actor).
pub fn actor_objective_and_gradient(actor: &Mlp, critic: &Mlp, states: &[&[f64]]) -> Result<(f64, GradientSet)> {
    if states.is_empty() {
        return Err(Error::Length("empty state batch".into()));
    }
    let n = states.len() as f64;
    let mut grads = GradientSet::zeros_like(actor);
    let mut objective = 0.0;
    for s in states {
        let (a, actor_cache) = actor.forward(s)?;
        let (q, critic_cache) = critic.forward(&critic_input(s, &a))?;
        objective += scalar(&q) / n;
        let (_, input_grad) = critic.backward(&critic_cache, &[1.0])?;
        let descent: Vec<f64> = input_grad[s.len()..].iter().map(|g| -g / n).collect();
        let (g, _) = actor.backward(&actor_cache, &descent)?;
        grads.add_assign(&g);
    }
    Ok((objective, grads))
}

/// One Adam step raising mean `Q(s, pi(s))`; the critic is read only. Returns the pre-step
/// objective.
pub fn update_actor(actor: &mut Mlp, critic: &Mlp, states: &[&[f64]], optimizer: &mut AdamState) -> Result<f64> {
    let (objective, grads) = actor_objective_and_gradient(actor, critic, states)?;
    if !objective.is_finite() {
        return Err(Error::Numeric(format!("actor objective became {objective}")));
    }
    adam_step(actor, &grads, optimizer)?;
    Ok(objective)
}

/// `theta' <- tau theta + (1 - tau) theta'`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::Shape("target and online networks differ in shape".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1], got {tau}")));
    }
    for (t, o) in target.parameters_mut().zip(online.parameters()) {
        *t = if tau == 1.0 { *o } else { tau * o + (1.0 - tau) * *t };
    }
    Ok(())
}

/// Actor allocation for `state`; `noise` is added to the logits before the softmax.
pub fn act(actor: &Mlp, state: &[f64], noise: Option<&[f64]>) -> Result<WeightVector> {
    if actor.output_head != OutputHead::SimplexSoftmax {
        return Err(Error::Config("actor must have a simplex-softmax head".into()));
    }
    let (out, cache) = actor.forward(state)?;
    let probs = match noise {
        None => out,
        Some(n) => {
            if n.len() != out.len() {
                return Err(Error::Shape(format!("{} noise values for {} actions", n.len(), out.len())));
            }
            let z: Vec<f64> = cache.logits().iter().zip(n).map(|(z, e)| z + e).collect();
            softmax(&z)
        }
    };
    WeightVector::normalized(probs)
}

/// Frozen actor used for evaluation.
#[derive(Debug, Clone)]
pub struct ActorPolicy<'a> {
    pub actor: &'a Mlp,
}

impl Policy for ActorPolicy<'_> {
    fn decide(&mut self, _panel: &MarketPanel, state: &EnvState) -> Result<WeightVector> {
        act(self.actor, &state.features, None)
    }
}

/// Online and target networks plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub config: TrainConfig,
    pub env: EnvConfig,
    pub assets: Vec<String>,
    pub seed: u64,
    pub episodes: usize,
    pub distilled: bool,
}

#[derive(Serialize, Deserialize)]
struct AgentDoc {
    version: String,
    seed: u64,
    episodes: usize,
    distilled: bool,
    assets: Vec<String>,
    config: TrainConfig,
    env: EnvConfig,
    actor: MlpDoc,
    critic: MlpDoc,
    target_actor: MlpDoc,
    target_critic: MlpDoc,
}

impl AgentCheckpoint {
    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.actor.same_shape(&self.target_actor) || !self.critic.same_shape(&self.target_critic) {
            return Err(Error::Shape("target networks differ in shape from online networks".into()));
        }
        let n = self.assets.len();
        if self.actor.output_dim() != n || self.critic.input_dim() != self.actor.input_dim() + n {
            return Err(Error::Shape("actor and critic shapes disagree with the asset count".into()));
        }
        if self.env.feature_dim(n) != self.actor.input_dim() {
            return Err(Error::Shape(format!(
                "environment yields {} features, actor expects {}",
                self.env.feature_dim(n),
                self.actor.input_dim()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = AgentDoc {
            version: AGENT_VERSION.into(),
            seed: self.seed,
            episodes: self.episodes,
            distilled: self.distilled,
            assets: self.assets.clone(),
            config: self.config.clone(),
            env: self.env.clone(),
            actor: (&self.actor).into(),
            critic: (&self.critic).into(),
            target_actor: (&self.target_actor).into(),
            target_critic: (&self.target_critic).into(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AgentDoc = serde_json::from_str(text)?;
        if doc.version != AGENT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version `{}`, expected `{AGENT_VERSION}`",
                doc.version
            )));
        }
        let ckpt = Self {
            actor: doc.actor.try_into()?,
            critic: doc.critic.try_into()?,
            target_actor: doc.target_actor.try_into()?,
            target_critic: doc.target_critic.try_into()?,
            config: doc.config,
            env: doc.env,
            assets: doc.assets,
            seed: doc.seed,
            episodes: doc.episodes,
            distilled: doc.distilled,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
