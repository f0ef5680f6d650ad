//! Reference online portfolio selection strategies.
//!
//! Every strategy is a [`Policy`] and trades through [`backtest_env::step`], so it pays the
//! same proportional costs as the agent. Online rules decide the allocation for the period
//! ending at `t + 1` from relatives observed up to `t`; their first decision is uniform.
//!
//! [`backtest_env::step`]: crate::backtest_env::step

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::backtest_env::{run_episode, EnvConfig, EnvState, FixedWeights, Policy};
use crate::error::{Error, Result};
use crate::market_data::{compute_returns, format_date, parse_date, price_relatives, MarketPanel, ReturnKind};
use crate::markowitz::{
    estimate_moments_until, project_simplex, solve_tradeoff, TeacherConfig, WeightVector, MAX_ITERATIONS,
    STEP_TOLERANCE,
};
use crate::metrics::{simple_returns, PortfolioTrajectory};

pub const DEFAULT_EG_ETA: f64 = 0.05;
pub const DEFAULT_PAMR_EPSILON: f64 = 0.5;
pub const DEFAULT_OLMAR_WINDOW: usize = 5;
pub const DEFAULT_OLMAR_EPSILON: f64 = 10.0;

/// Named strategies selectable from the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Bah,
    Crp,
    Bcrp,
    Eg { eta: f64 },
    Pamr { epsilon: f64 },
    Olmar { window: usize, epsilon: f64 },
    Markowitz(TeacherConfig),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Bah => "BAH",
            Strategy::Crp => "CRP",
            Strategy::Bcrp => "BCRP",
            Strategy::Eg { .. } => "EG",
            Strategy::Pamr { .. } => "PAMR",
            Strategy::Olmar { .. } => "OLMAR",
            Strategy::Markowitz(_) => "Markowitz",
        }
    }

    pub fn run(&self, panel: &MarketPanel, env: &EnvConfig) -> Result<PortfolioTrajectory> {
        let n = panel.n_assets();
        match self {
            Strategy::Bah => run_bah(panel, &WeightVector::uniform(n), env),
            Strategy::Crp => run_crp(panel, &WeightVector::uniform(n), env),
            Strategy::Bcrp => run_crp(panel, &solve_bcrp(panel)?, env),
            Strategy::Eg { eta } => run_eg(panel, *eta, env),
            Strategy::Pamr { epsilon } => run_pamr(panel, *epsilon, env),
            Strategy::Olmar { window, epsilon } => run_olmar(panel, *window, *epsilon, env),
            Strategy::Markowitz(cfg) => run_markowitz(panel, cfg, env),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Case-insensitive name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "bah" => Strategy::Bah,
            "crp" => Strategy::Crp,
            "bcrp" => Strategy::Bcrp,
            "eg" => Strategy::Eg { eta: DEFAULT_EG_ETA },
            "pamr" => Strategy::Pamr {
                epsilon: DEFAULT_PAMR_EPSILON,
            },
            "olmar" => Strategy::Olmar {
                window: DEFAULT_OLMAR_WINDOW,
                epsilon: DEFAULT_OLMAR_EPSILON,
            },
            "markowitz" => Strategy::Markowitz(TeacherConfig::default()),
            other => return Err(Error::Config(format!("unknown strategy `{other}`"))),
        })
    }
}

/// Allocation and per-rule scratch carried between decisions.
#[derive(Debug, Clone)]
pub struct StrategyState {
    pub weights: Option<WeightVector>,
    pub scratch: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    Eg { eta: f64 },
    Pamr { epsilon: f64 },
    Olmar { window: usize, epsilon: f64 },
}

/// An online strategy that starts at date index 0 and updates its last allocation.
#[derive(Debug, Clone)]
struct OnlinePolicy {
    rule: Rule,
    state: StrategyState,
}

impl OnlinePolicy {
    fn new(rule: Rule) -> Self {
        Self {
            rule,
            state: StrategyState {
                weights: None,
                scratch: Vec::new(),
            },
        }
    }
}

impl Policy for OnlinePolicy {
    fn decide(&mut self, panel: &MarketPanel, env: &EnvState) -> Result<WeightVector> {
        let n = panel.n_assets();
        let next = match self.state.weights.take() {
            None => WeightVector::uniform(n),
            Some(w) => match self.rule {
                Rule::Eg { eta } => eg_update(&w, &panel.relatives_at(env.t), eta)?,
                Rule::Pamr { epsilon } => pamr_update(&w, &panel.relatives_at(env.t), epsilon),
                Rule::Olmar { window, epsilon } => {
                    self.state.scratch = olmar_prediction(panel, env.t, window);
                    olmar_update(&w, &self.state.scratch, epsilon)
                }
            },
        };
        self.state.weights = Some(next.clone());
        Ok(next)
    }

    fn min_start(&self, _config: &EnvConfig) -> usize {
        0
    }
}

/// Exponentiated-gradient step `w_i exp(eta x_i / w.x)`, renormalized.
pub fn eg_update(w: &WeightVector, x: &[f64], eta: f64) -> Result<WeightVector> {
    let gross = w.dot(x);
    let factors: Vec<f64> = x.iter().map(|xi| (eta * xi / gross).exp()).collect();
    if factors.iter().all(|f| *f == factors[0]) {
        // A common factor cancels in the normalization.
        return Ok(w.clone());
    }
    WeightVector::normalized(w.as_slice().iter().zip(&factors).map(|(w, f)| w * f).collect())
}

fn mean_deviation(x: &[f64]) -> (Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm_sq = dev.iter().map(|d| d * d).sum();
    (dev, norm_sq)
}

/// PAMR-0: passive when `w.x <= epsilon`, otherwise step against the relative.
pub fn pamr_update(w: &WeightVector, x: &[f64], epsilon: f64) -> WeightVector {
    let loss = (w.dot(x) - epsilon).max(0.0);
    let (dev, norm_sq) = mean_deviation(x);
    if loss == 0.0 || norm_sq == 0.0 {
        return w.clone();
    }
    let tau = loss / norm_sq;
    let moved: Vec<f64> = w.as_slice().iter().zip(&dev).map(|(w, d)| w - tau * d).collect();
    project_simplex(&moved)
}

/// Moving-average predicted relative `(1/W) sum_k P_{t-k} / P_t`, over the available
/// history when fewer than `window` prices exist.
pub fn olmar_prediction(panel: &MarketPanel, t: usize, window: usize) -> Vec<f64> {
    let len = window.min(t + 1);
    (0..panel.n_assets())
        .map(|a| {
            let now = panel.close(a, t);
            (0..len).map(|k| panel.close(a, t - k) / now).sum::<f64>() / len as f64
        })
        .collect()
}

/// OLMAR-1 step toward the predicted relative.
pub fn olmar_update(w: &WeightVector, predicted: &[f64], epsilon: f64) -> WeightVector {
    let (dev, norm_sq) = mean_deviation(predicted);
    if norm_sq == 0.0 {
        return w.clone();
    }
    let tau = ((epsilon - w.dot(predicted)) / norm_sq).max(0.0);
    if tau == 0.0 {
        return w.clone();
    }
    let moved: Vec<f64> = w.as_slice().iter().zip(&dev).map(|(w, d)| w + tau * d).collect();
    project_simplex(&moved)
}

fn check_weights(panel: &MarketPanel, w: &WeightVector) -> Result<()> {
    if w.len() != panel.n_assets() {
        return Err(Error::Shape(format!("{} weights for {} assets", w.len(), panel.n_assets())));
    }
    Ok(())
}

/// Buy `initial` at the first date and let it drift.
pub fn run_bah(panel: &MarketPanel, initial: &WeightVector, env: &EnvConfig) -> Result<PortfolioTrajectory> {
    check_weights(panel, initial)?;
    let mut first = Some(initial.clone());
    let mut policy = move |_: &MarketPanel, s: &EnvState| -> Result<WeightVector> {
        Ok(first.take().unwrap_or_else(|| s.current_weights.clone()))
    };
    let env = EnvConfig {
        start: Some(env.start.unwrap_or(0)),
        ..env.clone()
    };
    run_episode(panel, &mut policy, &env)
}

/// Rebalance to `weights` every period.
pub fn run_crp(panel: &MarketPanel, weights: &WeightVector, env: &EnvConfig) -> Result<PortfolioTrajectory> {
    check_weights(panel, weights)?;
    let mut policy = FixedWeights {
        weights: weights.clone(),
        start: 0,
    };
    run_episode(panel, &mut policy, env)
}

/// Hindsight-optimal constant rebalanced portfolio: maximize `sum_t ln(w.x_t)` over the
/// simplex by projected gradient ascent from uniform.
pub fn solve_bcrp(panel: &MarketPanel) -> Result<WeightVector> {
    let relatives = price_relatives(panel)?.values;
    if relatives.is_empty() {
        return Err(Error::Length("BCRP needs at least 2 dates".into()));
    }
    let n = panel.n_assets();
    let periods = relatives.len() as f64;
    // Curvature of the mean log-wealth is bounded by mean |x|^2 / min(x)^2.
    let curvature = relatives
        .iter()
        .map(|x| {
            let min = x.iter().copied().fold(f64::INFINITY, f64::min);
            x.iter().map(|v| v * v).sum::<f64>() / (min * min)
        })
        .sum::<f64>()
        / periods;
    let step = 1.0 / curvature;
    let mut w = WeightVector::uniform(n);
    for _ in 0..MAX_ITERATIONS {
        let mut grad = vec![0.0; n];
        for x in &relatives {
            let gross = w.dot(x);
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += xi / gross / periods;
            }
        }
        let moved: Vec<f64> = w.as_slice().iter().zip(&grad).map(|(w, g)| w + step * g).collect();
        let next = project_simplex(&moved);
        let delta = next
            .as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if delta < STEP_TOLERANCE {
            break;
        }
    }
    if w.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("BCRP solver diverged".into()));
    }
    Ok(w)
}

pub fn run_eg(panel: &MarketPanel, eta: f64, env: &EnvConfig) -> Result<PortfolioTrajectory> {
    if !(eta >= 0.0) {
        return Err(Error::Domain(format!("EG learning rate must be non-negative, got {eta}")));
    }
    run_episode(panel, &mut OnlinePolicy::new(Rule::Eg { eta }), env)
}

pub fn run_pamr(panel: &MarketPanel, epsilon: f64, env: &EnvConfig) -> Result<PortfolioTrajectory> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("PAMR epsilon must be non-negative, got {epsilon}")));
    }
    run_episode(panel, &mut OnlinePolicy::new(Rule::Pamr { epsilon }), env)
}

pub fn run_olmar(panel: &MarketPanel, window: usize, epsilon: f64, env: &EnvConfig) -> Result<PortfolioTrajectory> {
    if window < 2 {
        return Err(Error::Domain(format!("OLMAR window must be at least 2, got {window}")));
    }
    if !(epsilon >= 1.0) {
        return Err(Error::Domain(format!("OLMAR epsilon must be at least 1, got {epsilon}")));
    }
    run_episode(panel, &mut OnlinePolicy::new(Rule::Olmar { window, epsilon }), env)
}

/// The trade-off teacher as a trading strategy: re-solve every `rebalance_every` dates
/// from the trailing window and hold the target in between (rebalancing back to it).
struct MarkowitzPolicy {
    config: TeacherConfig,
    returns: crate::market_data::ReturnMatrix,
    current: Option<WeightVector>,
    since: usize,
}

impl Policy for MarkowitzPolicy {
    fn decide(&mut self, _panel: &MarketPanel, state: &EnvState) -> Result<WeightVector> {
        let due = self.current.is_none() || self.since >= self.config.rebalance_every;
        if due {
            let moments = estimate_moments_until(&self.returns, state.t, self.config.window)?;
            self.current = Some(solve_tradeoff(&moments, self.config.lambda_risk)?);
            self.since = 0;
        }
        self.since += 1;
        Ok(self.current.clone().expect("set above"))
    }

    fn min_start(&self, _config: &EnvConfig) -> usize {
        self.config.window
    }
}

pub fn run_markowitz(panel: &MarketPanel, config: &TeacherConfig, env: &EnvConfig) -> Result<PortfolioTrajectory> {
    if config.rebalance_every == 0 {
        return Err(Error::Config("rebalance_every must be at least 1".into()));
    }
    let mut policy = MarkowitzPolicy {
        config: *config,
        returns: compute_returns(panel, ReturnKind::Simple)?,
        current: None,
        since: 0,
    };
    run_episode(panel, &mut policy, env)
}

/// `date,value,w_<asset>...,turnover`; turnover on a row is the trade made at that date
/// (zero on the last row).
pub fn write_trajectory_csv<W: Write>(traj: &PortfolioTrajectory, assets: &[String], writer: W) -> Result<()> {
    traj.validate()?;
    if traj.weights.iter().any(|w| w.len() != assets.len()) {
        return Err(Error::Shape("weight rows do not match the asset list".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string(), "value".to_string()];
    header.extend(assets.iter().map(|a| format!("w_{a}")));
    header.push("turnover".into());
    w.write_record(&header)?;
    for k in 0..traj.values.len() {
        let mut row = vec![format_date(traj.dates[k]), traj.values[k].to_string()];
        row.extend(traj.weights[k].as_slice().iter().map(f64::to_string));
        row.push(traj.turnover.get(k).copied().unwrap_or(0.0).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
    Ok(())
}

pub fn save_trajectory_csv(traj: &PortfolioTrajectory, assets: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory_csv(traj, assets, std::io::BufWriter::new(file))
}

/// Inverse of [`write_trajectory_csv`]; returns the trajectory and its asset names.
pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<(PortfolioTrajectory, Vec<String>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let n = header.len();
    if n < 4 || header[0] != "date" || header[1] != "value" || header[n - 1] != "turnover" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header date,value,w_<asset>...,turnover".into(),
        });
    }
    let assets: Vec<String> = header[2..n - 1]
        .iter()
        .map(|h| h.strip_prefix("w_").unwrap_or(h).to_string())
        .collect();
    let (mut dates, mut values, mut weights, mut turnover) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad number `{s}`: {e}"),
            })
        };
        dates.push(parse_date(&rec[0]).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?);
        values.push(num(&rec[1])?);
        let w: Vec<f64> = (2..n - 1).map(|j| num(&rec[j])).collect::<Result<_>>()?;
        weights.push(WeightVector::new(w).map_err(|e| Error::Validation {
            line,
            message: e.to_string(),
        })?);
        turnover.push(num(&rec[n - 1])?);
    }
    if values.is_empty() {
        return Err(Error::Length("trajectory file has no rows".into()));
    }
    turnover.pop();
    let traj = PortfolioTrajectory {
        period_returns: simple_returns(&values),
        dates,
        values,
        weights,
        turnover,
    };
    traj.validate()?;
    Ok((traj, assets))
}

pub fn load_trajectory_csv(path: impl AsRef<Path>) -> Result<(PortfolioTrajectory, Vec<String>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory_csv(file)
}
