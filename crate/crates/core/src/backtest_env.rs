//! The trading environment: state features, cost-aware rebalancing and episode runner.
//!
//! Every strategy (agent or baseline) trades through [`step`]. At date index `t` the policy
//! picks an allocation; the portfolio pays `cost_rate * turnover * V_t`, then grows by the
//! gross relative `a . x_{t+1}` and its weights drift with prices. The portfolio starts fully
//! invested in the uniform allocation, so the first trade pays for any move away from it.
//!
//! Account balance and share counts are implicit: with full reinvestment and fractional
//! shares they are determined by the portfolio value and the current weights.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::MarketPanel;
use crate::markowitz::WeightVector;
use crate::metrics::PortfolioTrajectory;

/// Window of the short and long simple moving averages in the indicator block.
pub const SMA_SHORT: usize = 5;
pub const SMA_LONG: usize = 20;
pub const MAX_COST_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    ValueChange,
    LogReturn,
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value-change" => Ok(Self::ValueChange),
            "log-return" => Ok(Self::LogReturn),
            other => Err(Error::Config(format!("unknown reward kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    RelativesWindow,
    RelativesWindowIndicators,
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relatives-window" => Ok(Self::RelativesWindow),
            "relatives-window+indicators" => Ok(Self::RelativesWindowIndicators),
            other => Err(Error::Config(format!("unknown feature set `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Days of log price relatives in the state.
    pub lookback: usize,
    /// Proportional cost per unit of traded notional.
    pub cost_rate: f64,
    pub reward_kind: RewardKind,
    pub initial_value: f64,
    pub feature_set: FeatureSet,
    /// First decision date index. `None` lets the policy choose (see [`Policy::min_start`]).
    #[serde(default)]
    pub start: Option<usize>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            lookback: 10,
            cost_rate: 0.001,
            reward_kind: RewardKind::LogReturn,
            initial_value: 1.0,
            feature_set: FeatureSet::RelativesWindow,
            start: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback < 1 {
            return Err(Error::Config("lookback must be at least 1".into()));
        }
        if !(0.0..=MAX_COST_RATE).contains(&self.cost_rate) {
            return Err(Error::Config(format!(
                "cost_rate must lie in [0, {MAX_COST_RATE}], got {}",
                self.cost_rate
            )));
        }
        if !(self.initial_value > 0.0) || !self.initial_value.is_finite() {
            return Err(Error::Config("initial_value must be positive".into()));
        }
        Ok(())
    }

    /// Smallest date index at which a full feature vector exists.
    pub fn warmup(&self) -> usize {
        match self.feature_set {
            FeatureSet::RelativesWindow => self.lookback,
            FeatureSet::RelativesWindowIndicators => self.lookback.max(SMA_LONG - 1),
        }
    }

    pub fn feature_dim(&self, n_assets: usize) -> usize {
        let indicators = match self.feature_set {
            FeatureSet::RelativesWindow => 0,
            FeatureSet::RelativesWindowIndicators => n_assets,
        };
        n_assets * self.lookback + n_assets + indicators
    }

    /// Column names of the feature vector, in layout order.
    pub fn feature_names(&self, assets: &[String]) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_dim(assets.len()));
        for a in assets {
            for lag in (0..self.lookback).rev() {
                names.push(format!("logrel_{a}_lag{lag}"));
            }
        }
        names.extend(assets.iter().map(|a| format!("weight_{a}")));
        if self.feature_set == FeatureSet::RelativesWindowIndicators {
            names.extend(assets.iter().map(|a| format!("sma{SMA_SHORT}_{SMA_LONG}_{a}")));
        }
        names
    }
}

/// Observable state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub portfolio_value: f64,
    pub current_weights: WeightVector,
    /// Policy input; empty before the feature warm-up date.
    pub features: Vec<f64>,
}

/// Feature vector at date index `t`:
/// per asset the last `lookback` log price relatives (oldest first, asset-major), then the
/// current weights, then optionally `ln(SMA5 / SMA20)` per asset.
pub fn make_state(panel: &MarketPanel, t: usize, current_weights: &WeightVector, config: &EnvConfig) -> Result<Vec<f64>> {
    let needed = config.warmup();
    if t < needed {
        return Err(Error::InsufficientHistory { needed, t });
    }
    if t >= panel.n_dates() {
        return Err(Error::Range(format!("date index {t} of {}", panel.n_dates())));
    }
    let n = panel.n_assets();
    if current_weights.len() != n {
        return Err(Error::Shape(format!("{} weights for {n} assets", current_weights.len())));
    }
    let mut features = Vec::with_capacity(config.feature_dim(n));
    for a in 0..n {
        for k in (t + 1 - config.lookback)..=t {
            features.push((panel.close(a, k) / panel.close(a, k - 1)).ln());
        }
    }
    features.extend_from_slice(current_weights.as_slice());
    if config.feature_set == FeatureSet::RelativesWindowIndicators {
        for a in 0..n {
            let sma = |len: usize| (t + 1 - len..=t).map(|k| panel.close(a, k)).sum::<f64>() / len as f64;
            features.push((sma(SMA_SHORT) / sma(SMA_LONG)).ln());
        }
    }
    Ok(features)
}

fn features_if_available(panel: &MarketPanel, t: usize, w: &WeightVector, config: &EnvConfig) -> Result<Vec<f64>> {
    if t < config.warmup() {
        Ok(Vec::new())
    } else {
        make_state(panel, t, w, config)
    }
}

/// Initial state at date index `t`: uniform weights, `initial_value`.
pub fn reset(panel: &MarketPanel, t: usize, config: &EnvConfig) -> Result<EnvState> {
    config.validate()?;
    panel.require_rectangular()?;
    if t + 1 >= panel.n_dates() {
        return Err(Error::Length(format!(
            "episode starting at date index {t} has no period to trade in a {}-date panel",
            panel.n_dates()
        )));
    }
    let w = WeightVector::uniform(panel.n_assets());
    Ok(EnvState {
        t,
        portfolio_value: config.initial_value,
        features: features_if_available(panel, t, &w, config)?,
        current_weights: w,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub turnover: f64,
    pub cost: f64,
}

/// Rebalance to `action` at `state.t` and advance one period.
pub fn step(state: &EnvState, action: &WeightVector, panel: &MarketPanel, config: &EnvConfig) -> Result<StepOutcome> {
    let next_t = state.t + 1;
    if next_t >= panel.n_dates() {
        return Err(Error::Range(format!("no date after index {}", state.t)));
    }
    if action.len() != panel.n_assets() {
        return Err(Error::Shape(format!("{} weights for {} assets", action.len(), panel.n_assets())));
    }
    let turnover = action.l1_distance(&state.current_weights);
    let cost = config.cost_rate * turnover * state.portfolio_value;
    let x = panel.relatives_at(next_t);
    let gross = action.dot(&x);
    let value = (state.portfolio_value - cost) * gross;
    let drifted: Vec<f64> = action.as_slice().iter().zip(&x).map(|(a, x)| a * x / gross).collect();
    let drifted = WeightVector::normalized(drifted)?;
    let reward = match config.reward_kind {
        RewardKind::ValueChange => value - state.portfolio_value,
        RewardKind::LogReturn => (value / state.portfolio_value).ln(),
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Numeric(format!("portfolio value became {value}")));
    }
    Ok(StepOutcome {
        state: EnvState {
            t: next_t,
            portfolio_value: value,
            features: features_if_available(panel, next_t, &drifted, config)?,
            current_weights: drifted,
        },
        reward,
        done: next_t + 1 == panel.n_dates(),
        turnover,
        cost,
    })
}

/// Maps the observable state to an allocation.
pub trait Policy {
    fn decide(&mut self, panel: &MarketPanel, state: &EnvState) -> Result<WeightVector>;

    /// First date index this policy can act on when the config does not fix one.
    fn min_start(&self, config: &EnvConfig) -> usize {
        config.warmup()
    }
}

impl<F> Policy for F
where
    F: FnMut(&MarketPanel, &EnvState) -> Result<WeightVector>,
{
    fn decide(&mut self, panel: &MarketPanel, state: &EnvState) -> Result<WeightVector> {
        self(panel, state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub trajectory: PortfolioTrajectory,
    pub rewards: Vec<f64>,
}

/// Run `policy` from its start date to the end of the panel.
pub fn run_episode(panel: &MarketPanel, policy: &mut dyn Policy, config: &EnvConfig) -> Result<PortfolioTrajectory> {
    Ok(run_episode_detailed(panel, policy, config)?.trajectory)
}

pub fn run_episode_detailed(panel: &MarketPanel, policy: &mut dyn Policy, config: &EnvConfig) -> Result<EpisodeRecord> {
    let start = config.start.unwrap_or_else(|| policy.min_start(config));
    let mut state = reset(panel, start, config)?;
    let mut dates = vec![panel.dates()[start]];
    let mut values = vec![state.portfolio_value];
    let mut weights = Vec::new();
    let mut period_returns = Vec::new();
    let mut turnover = Vec::new();
    let mut rewards = Vec::new();
    loop {
        let action = policy.decide(panel, &state)?;
        let out = step(&state, &action, panel, config)?;
        period_returns.push(out.state.portfolio_value / state.portfolio_value - 1.0);
        values.push(out.state.portfolio_value);
        dates.push(panel.dates()[out.state.t]);
        weights.push(action);
        turnover.push(out.turnover);
        rewards.push(out.reward);
        state = out.state;
        if out.done {
            break;
        }
    }
    weights.push(state.current_weights.clone());
    Ok(EpisodeRecord {
        trajectory: PortfolioTrajectory {
            dates,
            values,
            weights,
            period_returns,
            turnover,
        },
        rewards,
    })
}

/// A policy that always returns the same allocation.
#[derive(Debug, Clone)]
pub struct FixedWeights {
    pub weights: WeightVector,
    pub start: usize,
}

impl Policy for FixedWeights {
    fn decide(&mut self, _panel: &MarketPanel, _state: &EnvState) -> Result<WeightVector> {
        Ok(self.weights.clone())
    }

    fn min_start(&self, _config: &EnvConfig) -> usize {
        self.start
    }
}
