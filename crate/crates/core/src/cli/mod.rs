//! Command-line pipeline: ingest, frontier, distill, train, backtest, report.
//!
//! Every stage reads its inputs from the configured paths and writes into the output
//! directory, so stages can be rerun independently. Outputs carry no timestamps and are
//! byte-identical across runs with the same inputs and seed.

pub mod config;
pub mod svg;
pub mod table;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

pub use config::RunConfig;

use crate::backtest_env::EnvConfig;
use crate::baselines::{load_trajectory_csv, save_trajectory_csv};
use crate::error::{Error, Result};
use crate::kd_ddpg::{
    continue_training, distill_pretrain, evaluate, init_agent, save_episode_log, AgentCheckpoint,
};
use crate::market_data::{
    align_and_clean, clean_summary, compute_returns, load_ohlcv_csv, normalize_prices, save_panel_csv, split,
    MarketPanel, ReturnKind,
};
use crate::markowitz::{efficient_frontier, estimate_moments, teacher_allocations, FrontierPoint};
use crate::metrics::{report, simple_returns, MetricsReport, PortfolioTrajectory, ReportOptions};

pub const PANEL_FILE: &str = "panel.csv";
pub const FRONTIER_CSV: &str = "frontier.csv";
pub const FRONTIER_SVG: &str = "frontier.svg";
pub const TEACHER_CSV: &str = "teacher.csv";
pub const DISTILL_LOSS_CSV: &str = "distill_loss.csv";
pub const DISTILLED_AGENT: &str = "agent_distilled.json";
pub const AGENT: &str = "agent.json";
pub const EPISODES_CSV: &str = "episodes.csv";
pub const VALIDATION_CSV: &str = "validation_metrics.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const VALUES_SVG: &str = "values.svg";
pub const RISK_RETURN_SVG: &str = "risk_return.svg";
pub const TRAJECTORY_PREFIX: &str = "traj_";

#[derive(Debug, Parser)]
#[command(name = "kdlab", version, about = "Markowitz-distilled DDPG portfolio pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (flat key = value file).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Train plain DDPG from random initialization.
    #[arg(long, global = true)]
    pub no_distill: bool,
    /// Seed override (takes precedence over KDLAB_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Load, clean and normalize raw OHLCV data into the panel file.
    Ingest,
    /// Efficient frontier of the training split.
    Frontier,
    /// Build the teacher dataset and pretrain the actor on it.
    Distill,
    /// Run DDPG episodes on the training split.
    Train,
    /// Backtest the agent and baselines on the trading split.
    Backtest,
    /// Consolidated table and charts from trajectory files.
    Report,
}

/// Parse the configuration, apply overrides and run one command. Returns the text printed
/// on success.
pub fn run(cli: &Cli) -> Result<String> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_seed_override(cli.seed)?;
    if let Some(out) = &cli.out {
        let default_panel = cfg.panel == cfg.out.join(PANEL_FILE);
        cfg.out = out.clone();
        if default_panel {
            cfg.panel = cfg.out.join(PANEL_FILE);
        }
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg),
        Command::Frontier => cmd_frontier(&cfg),
        Command::Distill => cmd_distill(&cfg),
        Command::Train => cmd_train(&cfg, cli.no_distill),
        Command::Backtest => cmd_backtest(&cfg),
        Command::Report => cmd_report(&cfg),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<String> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("`data` is required for ingest".into()))?;
    let mut raw = load_ohlcv_csv(data)?;
    if let Some(b) = &cfg.benchmark {
        raw = raw.extract_benchmark(b)?;
    }
    let cleaned = align_and_clean(&raw, cfg.missing)?;
    let summary = clean_summary(&raw, &cleaned);
    let panel = normalize_prices(&cleaned)?;
    save_panel_csv(&panel, &cfg.panel)?;
    let mut out = format!(
        "assets: {} ({})\ndates: {} ({} to {})\n",
        summary.assets_out,
        panel.assets().join(", "),
        summary.dates,
        crate::market_data::format_date(panel.dates()[0]),
        crate::market_data::format_date(*panel.dates().last().expect("non-empty")),
    );
    if !summary.dropped_assets.is_empty() {
        out += &format!("dropped assets: {}\n", summary.dropped_assets.join(", "));
    }
    out += &format!("filled cells: {}\n", summary.filled_cells);
    if let Some(b) = panel.benchmark() {
        out += &format!("benchmark: {}\n", b.name);
    }
    Ok(out)
}

/// The cleaned panel, with the benchmark split out when configured.
pub fn load_panel(cfg: &RunConfig) -> Result<MarketPanel> {
    let mut panel = load_ohlcv_csv(&cfg.panel)?;
    if let Some(b) = &cfg.benchmark {
        panel = panel.extract_benchmark(b)?;
    }
    panel.require_rectangular()?;
    Ok(panel)
}

/// Split indices `(train_len, train_len + valid_len)`; without configured dates the split
/// falls at 60% and 80% of the dates.
fn split_indices(cfg: &RunConfig, panel: &MarketPanel) -> Result<(usize, usize)> {
    let n = panel.n_dates();
    let dates = panel.dates();
    let train_end = cfg.train_end.unwrap_or(dates[(n * 6 / 10).saturating_sub(1)]);
    let valid_end = cfg.valid_end.unwrap_or(dates[(n * 8 / 10).saturating_sub(1)]);
    let (train, valid, _) = split(panel, train_end, valid_end)?;
    Ok((train.n_dates(), train.n_dates() + valid.n_dates()))
}

pub fn write_frontier_csv<W: std::io::Write>(points: &[FrontierPoint], assets: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["risk".to_string(), "return".to_string()];
    header.extend(assets.iter().map(|a| format!("w_{a}")));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.risk.to_string(), p.expected_return.to_string()];
        row.extend(p.weights.as_slice().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<frontier csv>", e))?;
    Ok(())
}

pub fn cmd_frontier(cfg: &RunConfig) -> Result<String> {
    let panel = load_panel(cfg)?;
    let (train_len, _) = split_indices(cfg, &panel)?;
    let train = panel.slice(0, train_len);
    let returns = compute_returns(&train, ReturnKind::Simple)?;
    let moments = estimate_moments(&returns, returns.n_rows())?;
    let points = efficient_frontier(&moments, cfg.frontier_points)?;
    let mut csv_bytes = Vec::new();
    write_frontier_csv(&points, panel.assets(), &mut csv_bytes)?;
    write_file(&cfg.out.join(FRONTIER_CSV), &csv_bytes)?;
    let scatter: Vec<(String, f64, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("point {}", i + 1), p.risk, p.expected_return))
        .collect();
    let chart = svg::scatter(
        "Efficient frontier",
        "risk (daily standard deviation)",
        "expected daily return",
        &scatter,
        false,
    );
    write_file(&cfg.out.join(FRONTIER_SVG), chart.as_bytes())?;
    Ok(format!("frontier: {} points over {} training returns\n", points.len(), returns.n_rows()))
}

pub fn cmd_distill(cfg: &RunConfig) -> Result<String> {
    let panel = load_panel(cfg)?;
    let (train_len, _) = split_indices(cfg, &panel)?;
    let train = panel.slice(0, train_len);
    let dataset = teacher_allocations(&train, &cfg.teacher, &cfg.env)?;
    dataset.save_csv(cfg.out.join(TEACHER_CSV))?;
    let mut agent = init_agent(panel.assets(), &cfg.train, &cfg.env)?;
    let curve = distill_pretrain(&mut agent.actor, &dataset, &cfg.train.distill, cfg.train.seed)?;
    agent.distilled = true;
    agent.save(cfg.out.join(DISTILLED_AGENT))?;
    let mut loss_csv = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        loss_csv += &format!("{},{}\n", i + 1, l);
    }
    write_file(&cfg.out.join(DISTILL_LOSS_CSV), loss_csv.as_bytes())?;
    Ok(format!(
        "teacher records: {}\ndistillation epochs: {}\nfinal loss: {}\n",
        dataset.len(),
        curve.len(),
        curve.last().map_or("-".to_string(), |l| format!("{l:.6e}"))
    ))
}

/// Table label for an agent checkpoint.
pub fn agent_label(agent: &AgentCheckpoint) -> &'static str {
    match (agent.distilled, agent.episodes) {
        (true, 0) => "MKD",
        (true, _) => "KDD",
        (false, _) => "DDPG",
    }
}

pub fn cmd_train(cfg: &RunConfig, no_distill: bool) -> Result<String> {
    let panel = load_panel(cfg)?;
    let (train_len, valid_end) = split_indices(cfg, &panel)?;
    let train = panel.slice(0, train_len);
    let mut agent = if no_distill {
        init_agent(panel.assets(), &cfg.train, &cfg.env)?
    } else {
        let path = cfg.out.join(DISTILLED_AGENT);
        if !path.exists() {
            return Err(Error::Config(format!(
                "{} not found; run `distill` first or pass --no-distill",
                path.display()
            )));
        }
        AgentCheckpoint::load(path)?
    };
    agent.config = cfg.train.clone();
    agent.env = cfg.env.clone();
    agent.seed = cfg.train.seed;
    let outcome = continue_training(agent, &train, cfg.train.episodes)?;
    outcome.checkpoint.save(cfg.out.join(AGENT))?;
    save_episode_log(&outcome.episodes, cfg.out.join(EPISODES_CSV))?;

    let (valid_panel, start) = with_history(&panel, train_len, valid_end, cfg.env.warmup())?;
    let env = EnvConfig {
        start: Some(start),
        ..cfg.env.clone()
    };
    let bench = benchmark_returns(&valid_panel, start);
    let (_, metrics) = evaluate(&outcome.checkpoint, &valid_panel, &env, bench.as_deref(), &cfg.report)?;
    let label = agent_label(&outcome.checkpoint);
    let rows = vec![table::format_row(label, &metrics)];
    let mut bytes = Vec::new();
    table::write_csv(&rows, &mut bytes)?;
    write_file(&cfg.out.join(VALIDATION_CSV), &bytes)?;
    let last = outcome
        .episodes
        .last()
        .map_or("-".to_string(), |e| format!("{:.6}", e.cumulative_reward));
    Ok(format!(
        "{label}: {} episodes, last cumulative reward {last}\nvalidation:\n{}",
        outcome.episodes.len(),
        table::render_text(&rows)
    ))
}

/// `panel[begin..end]` extended backwards by `history` dates; returns the slice and the
/// index of `begin` inside it.
fn with_history(panel: &MarketPanel, begin: usize, end: usize, history: usize) -> Result<(MarketPanel, usize)> {
    if begin < history {
        return Err(Error::InsufficientHistory {
            needed: history,
            t: begin,
        });
    }
    Ok((panel.slice(begin - history, end), history))
}

/// Benchmark simple returns from date index `start` on.
fn benchmark_returns(panel: &MarketPanel, start: usize) -> Option<Vec<f64>> {
    panel.benchmark_closes().map(|c| simple_returns(&c[start..]))
}

fn benchmark_trajectory(panel: &MarketPanel, start: usize, initial: f64) -> Result<Option<(String, PortfolioTrajectory)>> {
    let (Some(b), Some(closes)) = (panel.benchmark(), panel.benchmark_closes()) else {
        return Ok(None);
    };
    let base = closes[start];
    let values = closes[start..].iter().map(|c| c / base * initial).collect();
    Ok(Some((
        b.name.clone(),
        PortfolioTrajectory::from_values(panel.dates()[start..].to_vec(), values)?,
    )))
}

fn benchmark_row(name: &str, traj: &PortfolioTrajectory, options: &ReportOptions) -> Result<Vec<String>> {
    let returns = &traj.period_returns;
    let mut metrics = report(traj, Some(returns), options)?;
    // a benchmark has no information ratio against itself
    metrics.information_ratio = None;
    Ok(table::format_row(name, &metrics))
}

pub fn cmd_backtest(cfg: &RunConfig) -> Result<String> {
    let panel = load_panel(cfg)?;
    let (_, valid_end) = split_indices(cfg, &panel)?;
    let agent = AgentCheckpoint::load(cfg.out.join(AGENT))?;
    let history = cfg.env.warmup().max(cfg.teacher.window);
    let (trade, start) = with_history(&panel, valid_end, panel.n_dates(), history)?;
    let env = EnvConfig {
        start: Some(start),
        ..cfg.env.clone()
    };
    let bench = benchmark_returns(&trade, start);
    let label = agent_label(&agent);

    let (agent_traj, agent_metrics) = evaluate(&agent, &trade, &env, bench.as_deref(), &cfg.report)?;
    let baseline_runs: Vec<(String, PortfolioTrajectory, MetricsReport)> = cfg
        .strategies
        .par_iter()
        .map(|s| {
            let traj = s.run(&trade, &env)?;
            let metrics = report(&traj, bench.as_deref(), &cfg.report)?;
            Ok((s.name().to_string(), traj, metrics))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    if let Some((name, traj)) = benchmark_trajectory(&trade, start, cfg.env.initial_value)? {
        rows.push(benchmark_row(&name, &traj, &cfg.report)?);
    }
    let mut runs = baseline_runs;
    runs.push((label.to_string(), agent_traj, agent_metrics));
    for (name, traj, metrics) in &runs {
        save_trajectory_csv(traj, trade.assets(), cfg.out.join(format!("{TRAJECTORY_PREFIX}{name}.csv")))?;
        rows.push(table::format_row(name, metrics));
    }
    let mut bytes = Vec::new();
    table::write_csv(&rows, &mut bytes)?;
    write_file(&cfg.out.join(METRICS_CSV), &bytes)?;
    Ok(table::render_text(&rows))
}

/// Trajectory files in the output directory, sorted by file name.
fn trajectory_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_prefix(TRAJECTORY_PREFIX).and_then(|n| n.strip_suffix(".csv")) {
            files.push((stem.to_string(), path.clone()));
        }
    }
    files.sort();
    Ok(files)
}

pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let files = trajectory_files(&cfg.out)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no {TRAJECTORY_PREFIX}*.csv files in {}",
            cfg.out.display()
        )));
    }
    let mut named = Vec::new();
    for (name, path) in files {
        named.push((name, load_trajectory_csv(&path)?.0));
    }
    let dates = named[0].1.dates.clone();
    if let Some((name, _)) = named.iter().find(|(_, t)| t.dates != dates) {
        return Err(Error::Validation {
            line: 0,
            message: format!("trajectory {name} is not aligned with {}", named[0].0),
        });
    }

    let benchmark = if cfg.benchmark.is_some() && cfg.panel.exists() {
        let panel = load_panel(cfg)?;
        let first = panel
            .dates()
            .iter()
            .position(|d| *d == dates[0])
            .ok_or_else(|| Error::Validation {
                line: 0,
                message: "trajectory dates are not in the panel".into(),
            })?;
        let last = first + dates.len();
        if last > panel.n_dates() || panel.dates()[first..last] != dates[..] {
            return Err(Error::Validation {
                line: 0,
                message: "trajectory dates do not match the panel".into(),
            });
        }
        benchmark_trajectory(&panel.slice(first, last), 0, named[0].1.values[0])?
    } else {
        None
    };
    let bench_returns = benchmark.as_ref().map(|(_, t)| t.period_returns.clone());

    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut series = Vec::new();
    if let Some((name, traj)) = &benchmark {
        rows.push(benchmark_row(name, traj, &cfg.report)?);
        let m = report(traj, None, &cfg.report)?;
        points.push((name.clone(), m.volatility, m.annualized_return));
        series.push((name.clone(), traj.values.clone()));
    }
    for (name, traj) in &named {
        let m = report(traj, bench_returns.as_deref(), &cfg.report)?;
        rows.push(table::format_row(name, &m));
        points.push((name.clone(), m.volatility, m.annualized_return));
        series.push((name.clone(), traj.values.clone()));
    }
    let mut bytes = Vec::new();
    table::write_csv(&rows, &mut bytes)?;
    write_file(&cfg.out.join(REPORT_CSV), &bytes)?;
    let span = format!(
        "{} to {}",
        crate::market_data::format_date(dates[0]),
        crate::market_data::format_date(*dates.last().expect("non-empty"))
    );
    let values = svg::line_chart(
        &format!("Portfolio value, {span}"),
        "trading day",
        "portfolio value",
        &series,
    );
    write_file(&cfg.out.join(VALUES_SVG), values.as_bytes())?;
    let rr = svg::scatter(
        "Risk vs return",
        "volatility (daily)",
        "annualized return",
        &points,
        true,
    );
    write_file(&cfg.out.join(RISK_RETURN_SVG), rr.as_bytes())?;
    let mut text = table::render_text(&rows);
    text.push_str(&format!("wrote {}, {}, {}\n", REPORT_CSV, VALUES_SVG, RISK_RETURN_SVG));
    Ok(text)
}
