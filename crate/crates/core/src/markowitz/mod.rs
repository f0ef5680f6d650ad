//! Long-only mean-variance optimization.
//!
//! Two readings of the mean-variance program are provided: the risk-aversion trade-off
//! `max w'mu - lambda w'Sigma w` (used as the distillation teacher) and the
//! target-return minimum-variance problem (used to trace the efficient frontier). Both are
//! solved by projected gradient over the probability simplex.

mod simplex;
mod teacher;

pub use simplex::{project_simplex, WeightVector};
pub use teacher::{teacher_allocations, TeacherConfig, TeacherDataset, TeacherRecord};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market_data::ReturnMatrix;

pub const MAX_ITERATIONS: usize = 100_000;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Covariance matrices are shifted so their smallest eigenvalue is at least this.
pub const MIN_EIGENVALUE: f64 = 1e-8;

/// Sample mean and covariance of per-period simple returns.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub window: usize,
}

impl MomentEstimate {
    /// Build from raw moments, symmetrizing and repairing the covariance.
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>, window: usize) -> Result<Self> {
        let n = mean.len();
        if n == 0 || covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::Shape(format!(
                "{n} means with a {}x{} covariance",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite moments".into()));
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance: repair_covariance(sym),
            window,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.mean.len()
    }

    /// (smallest, largest) eigenvalue of the covariance.
    pub fn eigen_extremes(&self) -> (f64, f64) {
        eigen_extremes(&self.covariance)
    }

    pub fn portfolio_return(&self, w: &[f64]) -> f64 {
        self.mean.iter().zip(w).map(|(m, w)| m * w).sum()
    }

    pub fn portfolio_variance(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        (w.transpose() * &self.covariance * &w)[(0, 0)]
    }

    /// Trade-off objective `w'mu - lambda w'Sigma w`.
    pub fn tradeoff_objective(&self, w: &[f64], lambda_risk: f64) -> f64 {
        self.portfolio_return(w) - lambda_risk * self.portfolio_variance(w)
    }
}

fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    (eig.min(), eig.max())
}

/// Add `eps * I` with `eps = max(0, MIN_EIGENVALUE - lambda_min)`.
pub fn repair_covariance(mut cov: DMatrix<f64>) -> DMatrix<f64> {
    let (lambda_min, _) = eigen_extremes(&cov);
    let eps = (MIN_EIGENVALUE - lambda_min).max(0.0);
    for i in 0..cov.nrows() {
        cov[(i, i)] += eps;
    }
    cov
}

/// Moments over the trailing `window` rows of `returns`.
pub fn estimate_moments(returns: &ReturnMatrix, window: usize) -> Result<MomentEstimate> {
    estimate_moments_until(returns, returns.n_rows(), window)
}

/// Moments over rows `[end - window, end)`.
pub fn estimate_moments_until(returns: &ReturnMatrix, end: usize, window: usize) -> Result<MomentEstimate> {
    if window < 2 {
        return Err(Error::Domain(format!("window must be at least 2, got {window}")));
    }
    if end > returns.n_rows() || end < window {
        return Err(Error::Length(format!(
            "window of {window} rows ending at row {end} exceeds {} available rows",
            returns.n_rows()
        )));
    }
    let n = returns.n_assets();
    let rows = &returns.values[end - window..end];
    let k = window as f64;
    let mean: Vec<f64> = (0..n).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / k).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (k - 1.0)
    });
    MomentEstimate::new(mean, cov, window)
}

fn linf_step(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Run projected gradient until the L-infinity step falls below [`STEP_TOLERANCE`].
fn projected_gradient(
    start: WeightVector,
    step_size: f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    project: impl Fn(&[f64]) -> WeightVector,
) -> WeightVector {
    let mut w = start;
    for _ in 0..MAX_ITERATIONS {
        let g = gradient(w.as_slice());
        let moved: Vec<f64> = w.as_slice().iter().zip(&g).map(|(w, g)| w + step_size * g).collect();
        let next = project(&moved);
        let step = linf_step(next.as_slice(), w.as_slice());
        w = next;
        if step < STEP_TOLERANCE {
            break;
        }
    }
    w
}

/// Maximize `w'mu - lambda w'Sigma w` over the simplex.
///
/// `lambda = 0` is a linear program: all weight goes to the highest-mean asset, ties broken
/// by the lowest index. Otherwise projected gradient ascent from the uniform portfolio with
/// step `1 / (2 lambda lambda_max(Sigma) + |mu|_inf)`.
pub fn solve_tradeoff(moments: &MomentEstimate, lambda_risk: f64) -> Result<WeightVector> {
    if !(lambda_risk >= 0.0) || !lambda_risk.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and non-negative, got {lambda_risk}")));
    }
    let n = moments.n_assets();
    let mu = &moments.mean;
    if lambda_risk == 0.0 {
        let best = (0..n).fold(0, |best, i| if mu[i] > mu[best] { i } else { best });
        return Ok(WeightVector::unit(n, best));
    }
    let (_, lambda_max) = moments.eigen_extremes();
    let mu_inf = mu.amax();
    let step = 1.0 / (2.0 * lambda_risk * lambda_max + mu_inf + 1e-12);
    let sigma = &moments.covariance;
    let w = projected_gradient(
        WeightVector::uniform(n),
        step,
        |w| {
            let sw = sigma * DVector::from_column_slice(w);
            (0..n).map(|i| mu[i] - 2.0 * lambda_risk * sw[i]).collect()
        },
        project_simplex,
    );
    check_finite(w)
}

fn check_finite(w: WeightVector) -> Result<WeightVector> {
    if w.as_slice().iter().all(|x| x.is_finite()) {
        Ok(w)
    } else {
        Err(Error::Numeric("solver produced non-finite weights".into()))
    }
}

/// Euclidean projection onto `{w in simplex : mu'w >= target}`.
///
/// When the plain simplex projection violates the return constraint the projection is
/// `P_simplex(v + nu mu)` for the multiplier `nu > 0` that makes the constraint tight,
/// found by bisection (the achieved return is non-decreasing in `nu`).
pub fn project_with_return_floor(v: &[f64], mu: &[f64], target: f64) -> WeightVector {
    let ret = |w: &WeightVector| w.dot(mu);
    let shifted = |nu: f64| -> WeightVector {
        let s: Vec<f64> = v.iter().zip(mu).map(|(v, m)| v + nu * m).collect();
        project_simplex(&s)
    };
    let base = project_simplex(v);
    if ret(&base) >= target {
        return base;
    }
    let mut hi = 1e-6;
    let mut w_hi = shifted(hi);
    while ret(&w_hi) < target && hi < 1e300 {
        hi *= 2.0;
        w_hi = shifted(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w_mid = shifted(mid);
        if ret(&w_mid) >= target {
            hi = mid;
            w_hi = w_mid;
        } else {
            lo = mid;
        }
    }
    w_hi
}

/// Minimize `w'Sigma w` over the simplex subject to `w'mu >= target`.
///
/// Projected gradient descent with step `1 / (2 lambda_max(Sigma))`, projecting onto the
/// feasible set exactly. Targets above `max(mu)` are infeasible.
pub fn solve_min_variance(moments: &MomentEstimate, target_return: f64) -> Result<WeightVector> {
    let n = moments.n_assets();
    let mu: Vec<f64> = moments.mean.iter().copied().collect();
    let mu_max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !target_return.is_finite() || target_return > mu_max {
        return Err(Error::Infeasible(format!(
            "target return {target_return} exceeds the best asset mean {mu_max}"
        )));
    }
    if n == 1 {
        return Ok(WeightVector::unit(1, 0));
    }
    let (_, lambda_max) = moments.eigen_extremes();
    let step = 1.0 / (2.0 * lambda_max);
    let sigma = &moments.covariance;
    let project = |v: &[f64]| project_with_return_floor(v, &mu, target_return);
    let start = project(WeightVector::uniform(n).as_slice());
    let w = projected_gradient(
        start,
        step,
        |w| {
            let sw = sigma * DVector::from_column_slice(w);
            sw.iter().map(|x| -2.0 * x).collect()
        },
        project,
    );
    check_finite(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    /// Portfolio standard deviation per period.
    pub risk: f64,
    pub expected_return: f64,
    pub weights: WeightVector,
}

/// `points` minimum-variance portfolios for equally spaced targets in `[min mu, max mu]`,
/// sorted by risk.
pub fn efficient_frontier(moments: &MomentEstimate, points: usize) -> Result<Vec<FrontierPoint>> {
    if moments.n_assets() < 2 {
        return Err(Error::Domain("frontier needs at least 2 assets".into()));
    }
    if points < 2 {
        return Err(Error::Domain(format!("frontier needs at least 2 points, got {points}")));
    }
    let lo = moments.mean.min();
    let hi = moments.mean.max();
    let targets: Vec<f64> = (0..points)
        .map(|k| {
            if k + 1 == points {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (points - 1) as f64
            }
        })
        .collect();
    let mut frontier = targets
        .par_iter()
        .map(|&target| {
            let weights = solve_min_variance(moments, target)?;
            Ok(FrontierPoint {
                risk: moments.portfolio_variance(weights.as_slice()).max(0.0).sqrt(),
                expected_return: moments.portfolio_return(weights.as_slice()),
                weights,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    frontier.sort_by(|a, b| {
        a.risk
            .total_cmp(&b.risk)
            .then(a.expected_return.total_cmp(&b.expected_return))
    });
    Ok(frontier)
}
