//! Performance indicators computed from a portfolio trajectory.
//!
//! Conventions: returns are decimal fractions; standard deviations use the sample (n - 1)
//! denominator except the downside deviation of the Sortino ratio, which is the population
//! deviation of the strictly negative excess returns. Sharpe and alpha are annualized;
//! Sortino, information ratio and volatility are per period.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::markowitz::WeightVector;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Values, allocations, returns and turnover produced by running any strategy.
///
/// `values`, `dates` and `weights` have one entry per date. `weights[k]` is the allocation
/// chosen at date `k` (the last entry holds the drifted weights at the horizon);
/// `period_returns` and `turnover` have one entry per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioTrajectory {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub weights: Vec<WeightVector>,
    pub period_returns: Vec<f64>,
    pub turnover: Vec<f64>,
}

impl PortfolioTrajectory {
    /// A trajectory for a single-series holding (e.g. a benchmark index): weights are `[1.0]`
    /// throughout and turnover is zero.
    pub fn from_values(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Length(format!("{} dates for {} values", dates.len(), values.len())));
        }
        let n = values.len();
        let traj = Self {
            dates,
            period_returns: simple_returns(&values),
            weights: vec![WeightVector::uniform(1); n],
            turnover: vec![0.0; n.saturating_sub(1)],
            values,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn periods(&self) -> usize {
        self.period_returns.len()
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty trajectory")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n == 0 {
            return Err(Error::Length("empty trajectory".into()));
        }
        if self.dates.len() != n || self.weights.len() != n {
            return Err(Error::Length(format!(
                "{} values, {} dates, {} weight rows",
                n,
                self.dates.len(),
                self.weights.len()
            )));
        }
        if self.period_returns.len() != n - 1 || self.turnover.len() != n - 1 {
            return Err(Error::Length(format!(
                "{} values need {} period returns and turnovers, got {} and {}",
                n,
                n - 1,
                self.period_returns.len(),
                self.turnover.len()
            )));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("trajectory values must be positive".into()));
        }
        Ok(())
    }
}

pub fn simple_returns(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

fn require_len(xs: &[f64], min: usize, what: &str) -> Result<()> {
    if xs.len() < min {
        return Err(Error::Length(format!("{what} needs at least {min} values, got {}", xs.len())));
    }
    Ok(())
}

fn require_paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Length(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    require_len(a, 2, "paired statistic")
}

pub fn total_return(values: &[f64]) -> Result<f64> {
    require_len(values, 2, "total return")?;
    let (first, last) = (values[0], values[values.len() - 1]);
    Ok((last - first) / first)
}

pub fn annualized_return(total: f64, years: f64) -> Result<f64> {
    if !(years > 0.0) {
        return Err(Error::Domain(format!("years must be positive, got {years}")));
    }
    if total <= -1.0 {
        return Err(Error::Domain(format!("total return must exceed -1, got {total}")));
    }
    Ok((1.0 + total).powf(1.0 / years) - 1.0)
}

/// Annualized Sharpe ratio: mean excess return over its sample std, times `sqrt(periods_per_year)`.
pub fn sharpe(returns: &[f64], risk_free: f64, periods_per_year: f64) -> Result<f64> {
    require_len(returns, 2, "sharpe")?;
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free).collect();
    let sd = sample_std(&excess);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero standard deviation of excess returns"));
    }
    Ok(mean(&excess) / sd * periods_per_year.sqrt())
}

/// Largest peak-to-trough decline as a fraction of the running peak.
pub fn max_drawdown(values: &[f64]) -> Result<f64> {
    require_len(values, 1, "max drawdown")?;
    let mut peak = values[0];
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    Ok(worst)
}

/// Largest peak-to-trough decline in value units.
pub fn max_drawdown_absolute(values: &[f64]) -> Result<f64> {
    require_len(values, 1, "max drawdown")?;
    let mut peak = values[0];
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max(peak - v);
    }
    Ok(worst)
}

pub fn sortino(returns: &[f64], risk_free: f64) -> Result<f64> {
    require_len(returns, 2, "sortino")?;
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free).collect();
    let downside: Vec<f64> = excess.iter().copied().filter(|x| *x < 0.0).collect();
    if downside.is_empty() {
        return Err(Error::Degenerate("no negative excess returns"));
    }
    let numerator = mean(&excess);
    if numerator == 0.0 {
        return Ok(0.0);
    }
    let m = mean(&downside);
    let sd = (downside.iter().map(|x| (x - m).powi(2)).sum::<f64>() / downside.len() as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero downside deviation"));
    }
    Ok(numerator / sd)
}

pub fn beta(portfolio: &[f64], market: &[f64]) -> Result<f64> {
    require_paired(portfolio, market)?;
    let var = sample_cov(market, market);
    if !(var > 0.0) {
        return Err(Error::Degenerate("zero market variance"));
    }
    Ok(sample_cov(portfolio, market) / var)
}

/// Jensen's alpha per period, annualized by `periods_per_year`.
pub fn alpha(portfolio: &[f64], market: &[f64], risk_free: f64, periods_per_year: f64) -> Result<f64> {
    let b = beta(portfolio, market)?;
    let per_period = mean(portfolio) - (risk_free + b * (mean(market) - risk_free));
    Ok(per_period * periods_per_year)
}

pub fn information_ratio(portfolio: &[f64], benchmark: &[f64]) -> Result<f64> {
    require_paired(portfolio, benchmark)?;
    let diff: Vec<f64> = portfolio.iter().zip(benchmark).map(|(p, b)| p - b).collect();
    let te = sample_std(&diff);
    if !(te > 0.0) {
        return Err(Error::Degenerate("zero tracking error"));
    }
    Ok(mean(&diff) / te)
}

pub fn calmar(annualized: f64, max_dd: f64) -> Result<f64> {
    if !(max_dd > 0.0) {
        return Err(Error::Degenerate("zero max drawdown"));
    }
    Ok(annualized / max_dd)
}

/// Fraction of periods with a strictly positive return.
pub fn win_rate(returns: &[f64]) -> Result<f64> {
    require_len(returns, 1, "win rate")?;
    Ok(returns.iter().filter(|r| **r > 0.0).count() as f64 / returns.len() as f64)
}

pub fn profit_loss_ratio(returns: &[f64]) -> Result<f64> {
    let wins: Vec<f64> = returns.iter().copied().filter(|r| *r > 0.0).collect();
    let losses: Vec<f64> = returns.iter().copied().filter(|r| *r < 0.0).collect();
    if wins.is_empty() || losses.is_empty() {
        return Err(Error::Degenerate("need at least one winning and one losing period"));
    }
    Ok(mean(&wins) / mean(&losses).abs())
}

pub fn volatility(returns: &[f64]) -> Result<f64> {
    require_len(returns, 2, "volatility")?;
    Ok(sample_std(returns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawdownMode {
    #[default]
    Fractional,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub risk_free: f64,
    pub periods_per_year: f64,
    pub drawdown: DrawdownMode,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            risk_free: 0.0,
            periods_per_year: TRADING_DAYS_PER_YEAR,
            drawdown: DrawdownMode::Fractional,
        }
    }
}

/// The twelve indicators. `None` marks "not applicable": no benchmark was supplied or the
/// ratio is degenerate (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub total_return: f64,
    pub annualized_return: f64,
    pub sharpe: Option<f64>,
    /// Reported as a non-positive number.
    pub max_drawdown: f64,
    pub sortino: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub information_ratio: Option<f64>,
    pub calmar: Option<f64>,
    pub win_rate: f64,
    pub profit_loss_ratio: Option<f64>,
    pub volatility: f64,
}

pub const METRIC_NAMES: [&str; 12] = [
    "total_return",
    "annualized_return",
    "sharpe",
    "max_drawdown",
    "sortino",
    "beta",
    "alpha",
    "information_ratio",
    "calmar",
    "win_rate",
    "profit_loss_ratio",
    "volatility",
];

impl MetricsReport {
    /// Fields in the order of [`METRIC_NAMES`].
    pub fn values(&self) -> [Option<f64>; 12] {
        [
            Some(self.total_return),
            Some(self.annualized_return),
            self.sharpe,
            Some(self.max_drawdown),
            self.sortino,
            self.beta,
            self.alpha,
            self.information_ratio,
            self.calmar,
            Some(self.win_rate),
            self.profit_loss_ratio,
            Some(self.volatility),
        ]
    }
}

fn applicable(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Compute every indicator for `trajectory`. Benchmark returns must cover the same periods.
pub fn report(
    trajectory: &PortfolioTrajectory,
    benchmark: Option<&[f64]>,
    options: &ReportOptions,
) -> Result<MetricsReport> {
    trajectory.validate()?;
    let values = &trajectory.values;
    let returns = &trajectory.period_returns;
    require_len(returns, 2, "report")?;
    if let Some(b) = benchmark {
        if b.len() != returns.len() {
            return Err(Error::Length(format!(
                "benchmark has {} periods, trajectory has {}",
                b.len(),
                returns.len()
            )));
        }
    }

    let rf = options.risk_free;
    let ppy = options.periods_per_year;
    let tr = total_return(values)?;
    let ar = annualized_return(tr, returns.len() as f64 / ppy)?;
    let mdd = match options.drawdown {
        DrawdownMode::Fractional => max_drawdown(values)?,
        DrawdownMode::Absolute => max_drawdown_absolute(values)?,
    };
    let (b, a, ir) = match benchmark {
        Some(bench) => (
            applicable(beta(returns, bench))?,
            applicable(alpha(returns, bench, rf, ppy))?,
            applicable(information_ratio(returns, bench))?,
        ),
        None => (None, None, None),
    };
    Ok(MetricsReport {
        total_return: tr,
        annualized_return: ar,
        sharpe: applicable(sharpe(returns, rf, ppy))?,
        max_drawdown: -mdd,
        sortino: applicable(sortino(returns, rf))?,
        beta: b,
        alpha: a,
        information_ratio: ir,
        calmar: applicable(calmar(ar, mdd))?,
        win_rate: win_rate(returns)?,
        profit_loss_ratio: applicable(profit_loss_ratio(returns))?,
        volatility: volatility(returns)?,
    })
}
