//! Markowitz-teacher knowledge distillation for DDPG portfolio agents.
//!
//! The crate loads daily OHLCV panels, computes mean-variance teacher allocations,
//! distills them into a deterministic actor, fine-tunes it with DDPG inside a
//! transaction-cost-aware environment and scores everything with a common metric suite.

pub mod backtest_env;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod kd_ddpg;
pub mod market_data;
pub mod markowitz;
pub mod metrics;
pub mod nn;
pub mod synthetic;

pub use error::{Error, Result};
