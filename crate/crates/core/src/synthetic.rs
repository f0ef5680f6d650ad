//! Seeded synthetic markets for experiments, demos and tests.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::market_data::{MarketPanel, Ohlcv};

/// `n` consecutive weekdays starting at `start` (or the next weekday after it).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = start;
    while dates.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    dates
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 2).expect("valid date")
}

fn tickers(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}", i + 1)).collect()
}

/// Deterministic exponential drift: asset `i` closes at `(1 + drifts[i])^t`.
pub fn drift_market(n_dates: usize, drifts: &[f64]) -> Result<MarketPanel> {
    if drifts.is_empty() || drifts.iter().any(|d| !(*d > -1.0)) {
        return Err(Error::Domain("drifts must be greater than -1".into()));
    }
    let closes = drifts
        .iter()
        .map(|d| (0..n_dates).map(|t| (1.0 + d).powi(t as i32)).collect())
        .collect();
    MarketPanel::from_closes(business_days(default_start(), n_dates), tickers("D", drifts.len()), closes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeMarketConfig {
    pub n_assets: usize,
    pub n_dates: usize,
    /// Dates per regime.
    pub regime_len: usize,
    /// Daily log drift of the leading asset in a regime.
    pub lead_drift: f64,
    /// Daily log drift of every other asset.
    pub lag_drift: f64,
    /// Daily log-return noise level.
    pub volatility: f64,
    pub seed: u64,
}

impl Default for RegimeMarketConfig {
    fn default() -> Self {
        Self {
            n_assets: 3,
            n_dates: 400,
            regime_len: 80,
            lead_drift: 0.004,
            lag_drift: -0.001,
            volatility: 0.005,
            seed: 0,
        }
    }
}

/// Piecewise-stationary market: each regime a seeded random asset leads, the others lag.
pub fn regime_switching_market(config: &RegimeMarketConfig) -> Result<MarketPanel> {
    if config.n_assets < 2 || config.regime_len == 0 || config.n_dates < 2 {
        return Err(Error::Domain("need 2+ assets, 2+ dates and a positive regime length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log_prices = vec![0.0f64; config.n_assets];
    let mut closes = vec![Vec::with_capacity(config.n_dates); config.n_assets];
    let mut leader = 0;
    for t in 0..config.n_dates {
        if t % config.regime_len == 0 {
            leader = rng.gen_range(0..config.n_assets);
        }
        for (a, lp) in log_prices.iter_mut().enumerate() {
            if t > 0 {
                let drift = if a == leader { config.lead_drift } else { config.lag_drift };
                let eps: f64 = rng.sample(StandardNormal);
                *lp += drift + config.volatility * eps;
            }
            closes[a].push(lp.exp());
        }
    }
    MarketPanel::from_closes(
        business_days(default_start(), config.n_dates),
        tickers("R", config.n_assets),
        closes,
    )
}

/// Correlated geometric random walks with plausible OHLCV bars and an equal-weight index
/// benchmark named `SYNIDX`. Used to produce the bundled demo dataset.
pub fn synthetic_ohlcv(n_assets: usize, n_dates: usize, seed: u64) -> Result<MarketPanel> {
    if n_assets == 0 || n_dates < 2 {
        return Err(Error::Domain("need at least one asset and two dates".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drifts: Vec<f64> = (0..n_assets).map(|_| rng.gen_range(-0.0002..0.0008)).collect();
    let vols: Vec<f64> = (0..n_assets).map(|_| rng.gen_range(0.008..0.02)).collect();
    let mut price: Vec<f64> = (0..n_assets).map(|_| rng.gen_range(20.0..200.0)).collect();
    let mut bars = vec![Vec::with_capacity(n_dates); n_assets];
    let mut index = Vec::with_capacity(n_dates);
    let mut index_level = 100.0;
    for t in 0..n_dates {
        let market: f64 = rng.sample(StandardNormal);
        let mut index_growth = 0.0;
        for a in 0..n_assets {
            let idio: f64 = rng.sample(StandardNormal);
            let open = price[a];
            let r = if t == 0 {
                0.0
            } else {
                drifts[a] + vols[a] * (0.6 * market + 0.8 * idio)
            };
            let close = open * r.exp();
            let wick_hi: f64 = rng.gen_range(0.0..0.5) * vols[a];
            let wick_lo: f64 = rng.gen_range(0.0..0.5) * vols[a];
            let high = open.max(close) * (1.0 + wick_hi);
            let low = open.min(close) * (1.0 - wick_lo);
            let volume = (rng.gen_range(5e5..5e6) as f64).round();
            bars[a].push(Ohlcv {
                open: round4(open),
                high: round4(high),
                low: round4(low),
                close: round4(close),
                volume,
            });
            index_growth += (close / open) / n_assets as f64;
            price[a] = close;
        }
        if t > 0 {
            index_level *= index_growth;
        }
        index.push(round4(index_level));
    }
    // rounding may nudge a bound past the body
    for series in &mut bars {
        for b in series.iter_mut() {
            b.high = b.high.max(b.open).max(b.close);
            b.low = b.low.min(b.open).min(b.close);
        }
    }
    MarketPanel::from_bars(business_days(default_start(), n_dates), tickers("SYN", n_assets), bars)?
        .with_benchmark("SYNIDX", index)
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}
