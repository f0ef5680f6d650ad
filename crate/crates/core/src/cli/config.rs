//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are resolved against
//! the directory holding the config file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::backtest_env::EnvConfig;
use crate::baselines::{
    Strategy, DEFAULT_EG_ETA, DEFAULT_OLMAR_EPSILON, DEFAULT_OLMAR_WINDOW, DEFAULT_PAMR_EPSILON,
};
use crate::error::{Error, Result};
use crate::kd_ddpg::{NoiseConfig, TrainConfig};
use crate::market_data::{parse_date, MissingPolicy};
use crate::markowitz::TeacherConfig;
use crate::metrics::{DrawdownMode, ReportOptions};
use crate::nn::Activation;

pub const SEED_ENV_VAR: &str = "KDLAB_SEED";

/// Every recognised key with a one-line description, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("data", "raw OHLCV CSV read by `ingest`"),
    ("panel", "cleaned panel CSV (default <out>/panel.csv)"),
    ("out", "output directory (default out)"),
    ("benchmark", "ticker treated as the benchmark index instead of an asset"),
    ("missing", "drop-asset | forward-fill"),
    ("train_end", "last training date, YYYY-MM-DD (default: 60% of dates)"),
    ("valid_end", "last validation date (default: 80% of dates)"),
    ("lookback", "days of log relatives in the state"),
    ("cost_rate", "proportional transaction cost"),
    ("reward", "log-return | value-change"),
    ("initial_value", "starting portfolio value"),
    ("features", "relatives-window | relatives-window+indicators"),
    ("teacher.window", "trailing return rows for the teacher's moments"),
    ("teacher.rebalance_every", "teacher rebalance interval in dates"),
    ("teacher.lambda", "teacher risk aversion"),
    ("gamma", "discount factor"),
    ("tau", "target network update rate"),
    ("batch_size", "replay minibatch size"),
    ("episodes", "DDPG training episodes"),
    ("buffer_capacity", "replay buffer capacity"),
    ("actor_lr", "actor learning rate"),
    ("critic_lr", "critic learning rate"),
    ("noise", "ou | gaussian"),
    ("noise.theta", "OU mean reversion"),
    ("noise.sigma", "noise scale"),
    ("noise.dt", "OU time step"),
    ("hidden", "comma-separated hidden layer widths"),
    ("activation", "relu | tanh"),
    ("reward_scale", "multiplier applied to rewards in the replay buffer"),
    ("seed", "master seed"),
    ("distill.loss", "mse | kd"),
    ("distill.temperature", "KD temperature"),
    ("distill.lambda", "KD soft-term weight"),
    ("distill.epochs", "distillation epochs"),
    ("distill.lr", "distillation learning rate"),
    ("distill.batch_size", "distillation minibatch size"),
    ("frontier.points", "number of efficient frontier points"),
    ("strategies", "comma-separated baselines: bah,crp,bcrp,eg,pamr,olmar,markowitz"),
    ("eg.eta", "EG learning rate"),
    ("pamr.epsilon", "PAMR sensitivity"),
    ("olmar.window", "OLMAR moving-average window"),
    ("olmar.epsilon", "OLMAR reversion threshold"),
    ("risk_free", "per-period risk-free rate"),
    ("periods_per_year", "annualization factor"),
    ("drawdown", "fractional | absolute"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub panel: PathBuf,
    pub out: PathBuf,
    pub benchmark: Option<String>,
    pub missing: MissingPolicy,
    pub train_end: Option<NaiveDate>,
    pub valid_end: Option<NaiveDate>,
    pub env: EnvConfig,
    pub teacher: TeacherConfig,
    pub train: TrainConfig,
    pub frontier_points: usize,
    pub strategies: Vec<Strategy>,
    pub report: ReportOptions,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got `{line}`"),
            })?;
            let key = key.trim();
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unknown key `{key}`"),
                });
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("key `{key}` given twice"),
                });
            }
        }
        Self::from_map(&map, base)
    }

    fn from_map(map: &BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let num = |k: &str, default: f64| -> Result<f64> { get(k).map_or(Ok(default), |v| parse_value(k, v)) };
        let count = |k: &str, default: usize| -> Result<usize> { get(k).map_or(Ok(default), |v| parse_value(k, v)) };
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let date = |k: &str| -> Result<Option<NaiveDate>> {
            get(k)
                .map(|v| parse_date(v).map_err(|_| Error::Config(format!("bad date `{v}` for `{k}`"))))
                .transpose()
        };

        let out = resolve(get("out").unwrap_or("out"));
        let panel = get("panel").map_or_else(|| out.join("panel.csv"), resolve);

        let env_default = EnvConfig::default();
        let env = EnvConfig {
            lookback: count("lookback", env_default.lookback)?,
            cost_rate: num("cost_rate", env_default.cost_rate)?,
            reward_kind: get("reward").map_or(Ok(env_default.reward_kind), |v| parse_value("reward", v))?,
            initial_value: num("initial_value", env_default.initial_value)?,
            feature_set: get("features").map_or(Ok(env_default.feature_set), |v| parse_value("features", v))?,
            start: None,
        };
        env.validate()?;

        let td = TeacherConfig::default();
        let teacher = TeacherConfig {
            window: count("teacher.window", td.window)?,
            rebalance_every: count("teacher.rebalance_every", td.rebalance_every)?,
            lambda_risk: num("teacher.lambda", td.lambda_risk)?,
        };

        let d = TrainConfig::default();
        let sigma = num("noise.sigma", 0.2)?;
        let noise = match get("noise").unwrap_or("ou") {
            "ou" => NoiseConfig::OrnsteinUhlenbeck {
                theta: num("noise.theta", 0.15)?,
                sigma,
                dt: num("noise.dt", 1.0)?,
            },
            "gaussian" => NoiseConfig::Gaussian { sigma },
            other => return Err(Error::Config(format!("unknown noise kind `{other}`"))),
        };
        let hidden = match get("hidden") {
            None => d.hidden.clone(),
            Some(v) => v
                .split(',')
                .map(|w| parse_value("hidden", w.trim()))
                .collect::<Result<Vec<usize>>>()?,
        };
        let activation = match get("activation").unwrap_or("relu") {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => return Err(Error::Config(format!("unknown activation `{other}`"))),
        };
        let mut distill = d.distill.clone();
        if let Some(v) = get("distill.loss") {
            distill.loss = parse_value("distill.loss", v)?;
        }
        distill.temperature = num("distill.temperature", distill.temperature)?;
        distill.lambda = num("distill.lambda", distill.lambda)?;
        distill.epochs = count("distill.epochs", distill.epochs)?;
        distill.lr = num("distill.lr", distill.lr)?;
        distill.batch_size = count("distill.batch_size", distill.batch_size)?;
        let train = TrainConfig {
            gamma: num("gamma", d.gamma)?,
            tau: num("tau", d.tau)?,
            batch_size: count("batch_size", d.batch_size)?,
            episodes: count("episodes", d.episodes)?,
            buffer_capacity: count("buffer_capacity", d.buffer_capacity)?,
            actor_lr: num("actor_lr", d.actor_lr)?,
            critic_lr: num("critic_lr", d.critic_lr)?,
            noise,
            distill,
            hidden,
            hidden_activation: activation,
            reward_scale: num("reward_scale", d.reward_scale)?,
            seed: get("seed").map_or(Ok(d.seed), |v| parse_value("seed", v))?,
        };
        train.validate()?;

        let strategies = get("strategies")
            .unwrap_or("bah,crp,bcrp,eg,pamr,olmar,markowitz")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                Ok(match s.parse::<Strategy>()? {
                    Strategy::Eg { .. } => Strategy::Eg {
                        eta: num("eg.eta", DEFAULT_EG_ETA)?,
                    },
                    Strategy::Pamr { .. } => Strategy::Pamr {
                        epsilon: num("pamr.epsilon", DEFAULT_PAMR_EPSILON)?,
                    },
                    Strategy::Olmar { .. } => Strategy::Olmar {
                        window: count("olmar.window", DEFAULT_OLMAR_WINDOW)?,
                        epsilon: num("olmar.epsilon", DEFAULT_OLMAR_EPSILON)?,
                    },
                    Strategy::Markowitz(_) => Strategy::Markowitz(teacher),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let report = ReportOptions {
            risk_free: num("risk_free", 0.0)?,
            periods_per_year: num("periods_per_year", crate::metrics::TRADING_DAYS_PER_YEAR)?,
            drawdown: match get("drawdown").unwrap_or("fractional") {
                "fractional" => DrawdownMode::Fractional,
                "absolute" => DrawdownMode::Absolute,
                other => return Err(Error::Config(format!("unknown drawdown mode `{other}`"))),
            },
        };

        let cfg = Self {
            data: get("data").map(resolve),
            panel,
            out,
            benchmark: get("benchmark").map(str::to_string),
            missing: get("missing").map_or(Ok(MissingPolicy::ForwardFill), |v| parse_value("missing", v))?,
            train_end: date("train_end")?,
            valid_end: date("valid_end")?,
            env,
            teacher,
            train,
            frontier_points: count("frontier.points", 20)?,
            strategies,
            report,
        };
        if let (Some(a), Some(b)) = (cfg.train_end, cfg.valid_end) {
            if a >= b {
                return Err(Error::Config("train_end must precede valid_end".into()));
            }
        }
        Ok(cfg)
    }

    /// Apply `--seed`, falling back to the `KDLAB_SEED` environment variable.
    pub fn apply_seed_override(&mut self, flag: Option<u64>) -> Result<()> {
        let from_env = match std::env::var(SEED_ENV_VAR) {
            Ok(v) => Some(parse_value::<u64>(SEED_ENV_VAR, v.trim())?),
            Err(_) => None,
        };
        if let Some(seed) = flag.or(from_env) {
            self.train.seed = seed;
        }
        Ok(())
    }
}
