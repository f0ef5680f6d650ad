//! C ABI over `kdlab`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the matching
//! `*_free` function. Fallible calls return a [`KdlabStatus`]; on failure the message is
//! available from [`kdlab_last_error`] on the same thread. Panics never unwind into C: they
//! are caught and reported as `KDLAB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use kdlab::backtest_env::EnvConfig;
use kdlab::baselines::Strategy;
use kdlab::kd_ddpg::{act, evaluate, AgentCheckpoint};
use kdlab::market_data::{align_and_clean, load_ohlcv_csv, normalize_prices, MarketPanel, MissingPolicy};
use kdlab::markowitz::{project_simplex, solve_tradeoff, MomentEstimate};
use kdlab::metrics::{report, PortfolioTrajectory, ReportOptions};
use kdlab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Numeric = 6,
    Panic = 7,
}

/// Loaded market panel.
pub struct KdlabPanel(MarketPanel);

/// Portfolio value path with weights and turnover.
pub struct KdlabTrajectory(PortfolioTrajectory);

/// Trained or distilled agent checkpoint.
pub struct KdlabAgent(AgentCheckpoint);

/// The twelve indicators; NaN where a metric is not applicable.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KdlabMetrics {
    pub total_return: f64,
    pub annualized_return: f64,
    pub sharpe: f64,
    pub max_drawdown: f64,
    pub sortino: f64,
    pub beta: f64,
    pub alpha: f64,
    pub information_ratio: f64,
    pub calmar: f64,
    pub win_rate: f64,
    pub profit_loss_ratio: f64,
    pub volatility: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> KdlabStatus {
    match e {
        Error::Io { .. } => KdlabStatus::Io,
        Error::Parse { .. } | Error::Duplicate { .. } | Error::Json(_) | Error::Csv(_) => KdlabStatus::Parse,
        Error::Numeric(_) => KdlabStatus::Numeric,
        Error::Domain(_) | Error::Shape(_) | Error::Length(_) | Error::Config(_) => KdlabStatus::InvalidArgument,
        _ => KdlabStatus::Validation,
    }
}

/// Run `f`, translating errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (KdlabStatus, String)>) -> KdlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            KdlabStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            KdlabStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (KdlabStatus, String)>;
}

impl<T> IntoFfi<T> for kdlab::Result<T> {
    fn ffi(self) -> Result<T, (KdlabStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (KdlabStatus, String) {
    (KdlabStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (KdlabStatus, String) {
    (KdlabStatus::InvalidArgument, msg.into())
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (KdlabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to `n` readable doubles.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (KdlabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` is null or points to `n` writable doubles.
unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], (KdlabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kdlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a successful call. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn kdlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a long-format OHLCV CSV. `benchmark` may be null; otherwise that ticker is split
/// out as the benchmark series.
///
/// # Safety
/// `path` and a non-null `benchmark` are NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kdlab_panel_load(
    path: *const c_char,
    benchmark: *const c_char,
    out: *mut *mut KdlabPanel,
) -> KdlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let mut panel = load_ohlcv_csv(path).ffi()?;
        if !benchmark.is_null() {
            panel = panel.extract_benchmark(c_str(benchmark, "benchmark")?).ffi()?;
        }
        store(out, KdlabPanel(panel));
        Ok(())
    })
}

/// Align, clean and rebase a panel. `forward_fill` non-zero fills gaps, zero drops assets
/// with gaps. The input handle is left untouched.
///
/// # Safety
/// `panel` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kdlab_panel_normalize(
    panel: *const KdlabPanel,
    forward_fill: i32,
    out: *mut *mut KdlabPanel,
) -> KdlabStatus {
    guard(|| {
        let panel = panel.as_ref().ok_or_else(|| null("panel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let policy = if forward_fill != 0 {
            MissingPolicy::ForwardFill
        } else {
            MissingPolicy::DropAsset
        };
        let cleaned = align_and_clean(&panel.0, policy).ffi()?;
        let normalized = normalize_prices(&cleaned).ffi()?;
        store(out, KdlabPanel(normalized));
        Ok(())
    })
}

/// Number of assets (0 for a null handle).
///
/// # Safety
/// `panel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdlab_panel_n_assets(panel: *const KdlabPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n_assets())
}

/// Number of dates (0 for a null handle).
///
/// # Safety
/// `panel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdlab_panel_n_dates(panel: *const KdlabPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n_dates())
}

/// Close of asset `asset` on date index `t`; NaN when out of range or missing.
///
/// # Safety
/// `panel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdlab_panel_close(panel: *const KdlabPanel, asset: usize, t: usize) -> f64 {
    match panel.as_ref() {
        Some(p) if asset < p.0.n_assets() && t < p.0.n_dates() => p.0.bar(asset, t).map_or(f64::NAN, |b| b.close),
        _ => f64::NAN,
    }
}

/// # Safety
/// `panel` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdlab_panel_free(panel: *mut KdlabPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Euclidean projection of `v` onto the probability simplex, written to `out`.
///
/// # Safety
/// `v` and `out` point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn kdlab_project_simplex(v: *const f64, n: usize, out: *mut f64) -> KdlabStatus {
    guard(|| {
        let v = slice(v, n, "v")?;
        let out = slice_mut(out, n, "out")?;
        if n == 0 || v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("v must be non-empty and finite"));
        }
        out.copy_from_slice(project_simplex(v).as_slice());
        Ok(())
    })
}

/// Long-only mean-variance weights maximizing `mean·w − λ wᵀΣw`. `cov` is row-major
/// `n × n`.
///
/// # Safety
/// `mean` and `out` point to `n` doubles, `cov` to `n * n`.
#[no_mangle]
pub unsafe extern "C" fn kdlab_solve_tradeoff(
    mean: *const f64,
    cov: *const f64,
    n: usize,
    lambda: f64,
    out: *mut f64,
) -> KdlabStatus {
    guard(|| {
        let mean = slice(mean, n, "mean")?;
        let cov = slice(cov, n * n, "cov")?;
        let out = slice_mut(out, n, "out")?;
        let moments = MomentEstimate::new(
            mean.to_vec(),
            nalgebra::DMatrix::from_row_slice(n, n, cov),
            0,
        )
        .ffi()?;
        let w = solve_tradeoff(&moments, lambda).ffi()?;
        out.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Run a baseline by name (`bah`, `crp`, `bcrp`, `eg`, `pamr`, `olmar`, `markowitz`) with
/// default parameters and the given proportional cost.
///
/// # Safety
/// `panel` is a live handle, `name` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kdlab_run_baseline(
    panel: *const KdlabPanel,
    name: *const c_char,
    cost_rate: f64,
    out: *mut *mut KdlabTrajectory,
) -> KdlabStatus {
    guard(|| {
        let panel = panel.as_ref().ok_or_else(|| null("panel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let strategy: Strategy = c_str(name, "name")?.parse().ffi()?;
        let env = EnvConfig {
            cost_rate,
            ..EnvConfig::default()
        };
        env.validate().ffi()?;
        let traj = strategy.run(&panel.0, &env).ffi()?;
        store(out, KdlabTrajectory(traj));
        Ok(())
    })
}

/// Number of portfolio values (0 for a null handle).
///
/// # Safety
/// `traj` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdlab_trajectory_len(traj: *const KdlabTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.values.len())
}

/// Copy the value path into `out`, which must hold exactly `kdlab_trajectory_len` doubles.
///
/// # Safety
/// `traj` is a live handle; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kdlab_trajectory_values(
    traj: *const KdlabTrajectory,
    out: *mut f64,
    len: usize,
) -> KdlabStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("traj"))?;
        if len != traj.0.values.len() {
            return Err(invalid(format!("buffer holds {len}, trajectory has {}", traj.0.values.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(&traj.0.values);
        Ok(())
    })
}

/// Copy the weights chosen at decision `t` into `out` (`n_assets` doubles).
///
/// # Safety
/// `traj` is a live handle; `out` points to `n_assets` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kdlab_trajectory_weights(
    traj: *const KdlabTrajectory,
    t: usize,
    out: *mut f64,
    n_assets: usize,
) -> KdlabStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("traj"))?;
        let w = traj
            .0
            .weights
            .get(t)
            .ok_or_else(|| invalid(format!("decision {t} out of range")))?;
        if w.len() != n_assets {
            return Err(invalid(format!("buffer holds {n_assets}, weights have {}", w.len())));
        }
        slice_mut(out, n_assets, "out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Metric suite of a trajectory. `benchmark` may be null (relative metrics become NaN);
/// otherwise it holds one simple return per period.
///
/// # Safety
/// `traj` is a live handle; a non-null `benchmark` points to `benchmark_len` doubles;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kdlab_trajectory_metrics(
    traj: *const KdlabTrajectory,
    benchmark: *const f64,
    benchmark_len: usize,
    risk_free: f64,
    periods_per_year: f64,
    out: *mut KdlabMetrics,
) -> KdlabStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("traj"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let bench = if benchmark.is_null() {
            None
        } else {
            Some(slice(benchmark, benchmark_len, "benchmark")?)
        };
        let options = ReportOptions {
            risk_free,
            periods_per_year,
            ..ReportOptions::default()
        };
        let m = report(&traj.0, bench, &options).ffi()?;
        let na = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = KdlabMetrics {
            total_return: m.total_return,
            annualized_return: m.annualized_return,
            sharpe: na(m.sharpe),
            max_drawdown: m.max_drawdown,
            sortino: na(m.sortino),
            beta: na(m.beta),
            alpha: na(m.alpha),
            information_ratio: na(m.information_ratio),
            calmar: na(m.calmar),
            win_rate: m.win_rate,
            profit_loss_ratio: na(m.profit_loss_ratio),
            volatility: m.volatility,
        };
        Ok(())
    })
}

/// # Safety
/// `traj` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdlab_trajectory_free(traj: *mut KdlabTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Load an agent checkpoint written by the CLI.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kdlab_agent_load(path: *const c_char, out: *mut *mut KdlabAgent) -> KdlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let agent = AgentCheckpoint::load(c_str(path, "path")?).ffi()?;
        store(out, KdlabAgent(agent));
        Ok(())
    })
}

/// Length of the state vector the actor expects (0 for a null handle).
///
/// # Safety
/// `agent` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdlab_agent_state_dim(agent: *const KdlabAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.0.state_dim())
}

/// Number of assets the agent allocates over (0 for a null handle).
///
/// # Safety
/// `agent` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kdlab_agent_n_assets(agent: *const KdlabAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.0.assets.len())
}

/// Deterministic allocation for one state.
///
/// # Safety
/// `agent` is a live handle; `state` points to `state_len` doubles and `out` to
/// `n_assets` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kdlab_agent_act(
    agent: *const KdlabAgent,
    state: *const f64,
    state_len: usize,
    out: *mut f64,
    n_assets: usize,
) -> KdlabStatus {
    guard(|| {
        let agent = agent.as_ref().ok_or_else(|| null("agent"))?;
        if n_assets != agent.0.assets.len() {
            return Err(invalid(format!("buffer holds {n_assets}, agent has {} assets", agent.0.assets.len())));
        }
        let w = act(&agent.0.actor, slice(state, state_len, "state")?, None).ffi()?;
        slice_mut(out, n_assets, "out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Run the agent greedily over a panel with its own environment settings.
///
/// # Safety
/// `agent` and `panel` are live handles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kdlab_agent_evaluate(
    agent: *const KdlabAgent,
    panel: *const KdlabPanel,
    out: *mut *mut KdlabTrajectory,
) -> KdlabStatus {
    guard(|| {
        let agent = agent.as_ref().ok_or_else(|| null("agent"))?;
        let panel = panel.as_ref().ok_or_else(|| null("panel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let env = agent.0.env.clone();
        let (traj, _) = evaluate(&agent.0, &panel.0, &env, None, &ReportOptions::default()).ffi()?;
        store(out, KdlabTrajectory(traj));
        Ok(())
    })
}

/// # Safety
/// `agent` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdlab_agent_free(agent: *mut KdlabAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}
