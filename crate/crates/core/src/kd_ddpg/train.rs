use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::{act, critic_targets, soft_update, update_actor, update_critic, ActorPolicy, AgentCheckpoint};
use super::noise::ExplorationNoise;
use super::replay::{ReplayBuffer, Transition};
use super::{DistillConfig, DistillLoss, TrainConfig};
use crate::backtest_env::{reset, run_episode, step, EnvConfig};
use crate::error::{Error, Result};
use crate::market_data::MarketPanel;
use crate::markowitz::TeacherDataset;
use crate::metrics::{report, MetricsReport, PortfolioTrajectory, ReportOptions};
use crate::nn::{adam_step, kd_loss, mse_loss, AdamConfig, AdamState, GradientSet, Mlp, OutputHead};

/// Floor applied to teacher weights before taking logs for the KD loss.
const TEACHER_LOGIT_FLOOR: f64 = 1e-8;

// Independent generator streams per phase, so a distill-then-train pipeline run in two
// steps draws the same numbers as a single call.
const STREAM_DISTILL: u64 = 1;
const STREAM_RL: u64 = 2;

fn phase_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Sum of unscaled environment rewards.
    pub cumulative_reward: f64,
    pub critic_loss_mean: f64,
    pub actor_objective_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: AgentCheckpoint,
    pub episodes: Vec<EpisodeLog>,
    pub distill_losses: Vec<f64>,
}

fn check_dataset(actor: &Mlp, dataset: &TeacherDataset) -> Result<()> {
    for r in &dataset.records {
        if r.state_features.len() != actor.input_dim() || r.target_weights.len() != actor.output_dim() {
            return Err(Error::Shape(format!(
                "teacher record ({} features, {} weights) does not fit actor {:?}",
                r.state_features.len(),
                r.target_weights.len(),
                actor.layer_sizes
            )));
        }
    }
    Ok(())
}

/// Mean per-record MSE between actor outputs and teacher weights.
pub fn dataset_mse(actor: &Mlp, dataset: &TeacherDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Length("empty teacher dataset".into()));
    }
    check_dataset(actor, dataset)?;
    let mut total = 0.0;
    for r in &dataset.records {
        total += mse_loss(&actor.predict(&r.state_features)?, r.target_weights.as_slice())?.0;
    }
    Ok(total / dataset.len() as f64)
}

/// Supervised fit of the actor to the teacher targets; returns the mean loss of each epoch.
pub fn distill_pretrain(actor: &mut Mlp, dataset: &TeacherDataset, config: &DistillConfig, seed: u64) -> Result<Vec<f64>> {
    if config.epochs == 0 {
        return Ok(Vec::new());
    }
    if dataset.is_empty() {
        return Err(Error::Length("empty teacher dataset".into()));
    }
    if actor.output_head != OutputHead::SimplexSoftmax {
        return Err(Error::Config("actor must have a simplex-softmax head".into()));
    }
    check_dataset(actor, dataset)?;
    let mut rng = phase_rng(seed, STREAM_DISTILL);
    let mut optimizer = AdamState::new(
        actor,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = GradientSet::zeros_like(actor);
            for &i in batch {
                let record = &dataset.records[i];
                let (out, cache) = actor.forward(&record.state_features)?;
                let target = record.target_weights.as_slice();
                let (loss, g) = match config.loss {
                    DistillLoss::Mse => {
                        let (loss, grad) = mse_loss(&out, target)?;
                        (loss, actor.backward(&cache, &grad)?.0)
                    }
                    DistillLoss::Kd => {
                        let teacher: Vec<f64> = target.iter().map(|w| w.max(TEACHER_LOGIT_FLOOR).ln()).collect();
                        let (loss, grad) = kd_loss(cache.logits(), &teacher, target, config.temperature, config.lambda)?;
                        (loss, actor.backward_logits(&cache, &grad)?.0)
                    }
                };
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("distillation loss became {loss}")));
                }
                epoch_loss += loss;
                let mut g = g;
                g.scale(scale);
                grads.add_assign(&g);
            }
            adam_step(actor, &grads, &mut optimizer)?;
        }
        curve.push(epoch_loss / dataset.len() as f64);
    }
    Ok(curve)
}

/// Fresh actor, critic and identical target copies.
pub fn init_agent(assets: &[String], config: &TrainConfig, env: &EnvConfig) -> Result<AgentCheckpoint> {
    config.validate()?;
    env.validate()?;
    let n = assets.len();
    let state_dim = env.feature_dim(n);
    let actor = Mlp::new(
        &config.actor_sizes(state_dim, n),
        config.hidden_activation,
        OutputHead::SimplexSoftmax,
        config.seed,
    )?;
    let critic = Mlp::new(
        &config.critic_sizes(state_dim, n),
        config.hidden_activation,
        OutputHead::Linear,
        config.seed.wrapping_add(1),
    )?;
    Ok(AgentCheckpoint {
        target_actor: actor.clone(),
        target_critic: critic.clone(),
        actor,
        critic,
        config: config.clone(),
        env: env.clone(),
        assets: assets.to_vec(),
        seed: config.seed,
        episodes: 0,
        distilled: false,
    })
}

/// Full training run: initialize, copy to targets, optionally distill from `teacher`, then
/// `config.episodes` DDPG episodes over `panel`.
pub fn train(
    panel: &MarketPanel,
    config: &TrainConfig,
    env: &EnvConfig,
    teacher: Option<&TeacherDataset>,
) -> Result<TrainOutcome> {
    let mut agent = init_agent(panel.assets(), config, env)?;
    let mut distill_losses = Vec::new();
    if config.distill.enabled {
        if let Some(dataset) = teacher {
            distill_losses = distill_pretrain(&mut agent.actor, dataset, &config.distill, config.seed)?;
            agent.distilled = true;
        }
    }
    let mut outcome = continue_training(agent, panel, config.episodes)?;
    outcome.distill_losses = distill_losses;
    Ok(outcome)
}

/// Run `episodes` DDPG episodes starting from an existing checkpoint, using its
/// configuration. Optimizer moments and the replay buffer start empty.
pub fn continue_training(mut agent: AgentCheckpoint, panel: &MarketPanel, episodes: usize) -> Result<TrainOutcome> {
    agent.validate()?;
    if panel.assets() != agent.assets.as_slice() {
        return Err(Error::Shape("panel assets differ from the checkpoint's".into()));
    }
    let config = agent.config.clone();
    let env = agent.env.clone();
    let n = panel.n_assets();
    let mut rng = phase_rng(config.seed, STREAM_RL);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut noise = ExplorationNoise::new(config.noise, n)?;
    let adam = |lr: f64| AdamConfig {
        lr,
        ..AdamConfig::default()
    };
    let mut actor_opt = AdamState::new(&agent.actor, adam(config.actor_lr));
    let mut critic_opt = AdamState::new(&agent.critic, adam(config.critic_lr));
    let start = env.start.unwrap_or_else(|| env.warmup());
    let mut logs = Vec::with_capacity(episodes);

    for _ in 0..episodes {
        noise.reset();
        let mut state = reset(panel, start, &env)?;
        let (mut reward_sum, mut critic_sum, mut actor_sum, mut updates) = (0.0, 0.0, 0.0, 0usize);
        loop {
            let eps = noise.sample(&mut rng);
            let action = act(&agent.actor, &state.features, Some(&eps))?;
            let out = step(&state, &action, panel, &env)?;
            reward_sum += out.reward;
            buffer.push(Transition {
                state: std::mem::take(&mut state.features),
                action,
                reward: out.reward * config.reward_scale,
                next_state: out.state.features.clone(),
                done: out.done,
            })?;
            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(config.batch_size, &mut rng)?;
                let y = critic_targets(&batch, &agent.target_actor, &agent.target_critic, config.gamma)?;
                critic_sum += update_critic(&mut agent.critic, &batch, &y, &mut critic_opt)?;
                let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
                actor_sum += update_actor(&mut agent.actor, &agent.critic, &states, &mut actor_opt)?;
                soft_update(&mut agent.target_critic, &agent.critic, config.tau)?;
                soft_update(&mut agent.target_actor, &agent.actor, config.tau)?;
                updates += 1;
            }
            state = out.state;
            if out.done {
                break;
            }
        }
        agent.episodes += 1;
        let mean = |s: f64| if updates == 0 { 0.0 } else { s / updates as f64 };
        logs.push(EpisodeLog {
            episode: agent.episodes,
            cumulative_reward: reward_sum,
            critic_loss_mean: mean(critic_sum),
            actor_objective_mean: mean(actor_sum),
        });
    }
    Ok(TrainOutcome {
        checkpoint: agent,
        episodes: logs,
        distill_losses: Vec::new(),
    })
}

/// Noise-free backtest of the checkpoint's actor followed by the metric report.
pub fn evaluate(
    checkpoint: &AgentCheckpoint,
    panel: &MarketPanel,
    env: &EnvConfig,
    benchmark: Option<&[f64]>,
    options: &ReportOptions,
) -> Result<(PortfolioTrajectory, MetricsReport)> {
    checkpoint.validate()?;
    let dim = env.feature_dim(panel.n_assets());
    if dim != checkpoint.state_dim() {
        return Err(Error::Shape(format!(
            "environment yields {dim} features, checkpoint expects {}",
            checkpoint.state_dim()
        )));
    }
    let mut policy = ActorPolicy {
        actor: &checkpoint.actor,
    };
    let trajectory = run_episode(panel, &mut policy, env)?;
    let metrics = report(&trajectory, benchmark, options)?;
    Ok((trajectory, metrics))
}

pub const EPISODE_LOG_HEADER: [&str; 4] = ["episode", "cumulative_reward", "critic_loss_mean", "actor_objective_mean"];

pub fn write_episode_log<W: Write>(logs: &[EpisodeLog], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EPISODE_LOG_HEADER)?;
    for l in logs {
        w.write_record([
            l.episode.to_string(),
            l.cumulative_reward.to_string(),
            l.critic_loss_mean.to_string(),
            l.actor_objective_mean.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<episode log>", e))?;
    Ok(())
}

pub fn save_episode_log(logs: &[EpisodeLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_episode_log(logs, std::io::BufWriter::new(file))
}

pub fn read_episode_log<R: Read>(reader: R) -> Result<Vec<EpisodeLog>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(EPISODE_LOG_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", EPISODE_LOG_HEADER.join(",")),
        });
    }
    let mut logs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |s: &str| Error::Parse {
            line,
            message: format!("bad value `{s}`"),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        logs.push(EpisodeLog {
            episode: rec[0].parse().map_err(|_| bad(&rec[0]))?,
            cumulative_reward: num(&rec[1])?,
            critic_loss_mean: num(&rec[2])?,
            actor_objective_mean: num(&rec[3])?,
        });
    }
    Ok(logs)
}
