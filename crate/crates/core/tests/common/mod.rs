//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use kdlab::markowitz::MomentEstimate;
use kdlab::nn::Mlp;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PERIODS_PER_YEAR: f64 = 252.0;

pub fn dates(n: usize) -> Vec<NaiveDate> {
    kdlab::synthetic::business_days(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), n)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------- metrics

fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m) * (v - m);
    }
    s / (x.len() as f64 - 1.0)
}

/// Direct transcription of the twelve indicator formulas, written without reference to the
/// library code. Risk-free rate 0, daily annualization, benchmark as per-period returns.
/// Order: TR, AR, Sharpe, MD (negative), Sortino, Beta, Alpha, IR, Calmar, WR, PLR, Vol.
pub fn oracle_metrics(values: &[f64], bench: Option<&[f64]>) -> [Option<f64>; 12] {
    let mut r = Vec::new();
    for i in 1..values.len() {
        r.push(values[i] / values[i - 1] - 1.0);
    }
    let n = r.len() as f64;
    let tr = (values[values.len() - 1] - values[0]) / values[0];
    let ar = (1.0 + tr).powf(1.0 / (n / PERIODS_PER_YEAR)) - 1.0;
    let sd = sample_var(&r).sqrt();
    let sharpe = if sd > 0.0 { Some(mean(&r) / sd * PERIODS_PER_YEAR.sqrt()) } else { None };

    let mut peak = values[0];
    let mut mdd = 0.0_f64;
    for &v in values {
        if v > peak {
            peak = v;
        }
        let dd = (peak - v) / peak;
        if dd > mdd {
            mdd = dd;
        }
    }

    let neg: Vec<f64> = r.iter().copied().filter(|x| *x < 0.0).collect();
    let sortino = if neg.is_empty() {
        None
    } else if mean(&r) == 0.0 {
        Some(0.0)
    } else {
        let m = mean(&neg);
        let mut s = 0.0;
        for v in &neg {
            s += (v - m) * (v - m);
        }
        let sd_down = (s / neg.len() as f64).sqrt();
        if sd_down > 0.0 {
            Some(mean(&r) / sd_down)
        } else {
            None
        }
    };

    let (beta, alpha, ir) = match bench {
        None => (None, None, None),
        Some(b) => {
            let (mp, mb) = (mean(&r), mean(b));
            let mut cov = 0.0;
            for i in 0..r.len() {
                cov += (r[i] - mp) * (b[i] - mb);
            }
            cov /= n - 1.0;
            let var_b = sample_var(b);
            let beta = if var_b > 0.0 { Some(cov / var_b) } else { None };
            let alpha = beta.map(|bt| (mp - bt * mb) * PERIODS_PER_YEAR);
            let d: Vec<f64> = r.iter().zip(b).map(|(x, y)| x - y).collect();
            let te = sample_var(&d).sqrt();
            let ir = if te > 0.0 { Some(mean(&d) / te) } else { None };
            (beta, alpha, ir)
        }
    };
    let calmar = if mdd > 0.0 { Some(ar / mdd) } else { None };
    let wins = r.iter().filter(|x| **x > 0.0).count() as f64;
    let pos: Vec<f64> = r.iter().copied().filter(|x| *x > 0.0).collect();
    let plr = if pos.is_empty() || neg.is_empty() {
        None
    } else {
        Some(mean(&pos) / mean(&neg).abs())
    };
    [
        Some(tr),
        Some(ar),
        sharpe,
        Some(-mdd),
        sortino,
        beta,
        alpha,
        ir,
        calmar,
        Some(wins / n),
        plr,
        Some(sd),
    ]
}

// -------------------------------------------------------------- markowitz

/// All points of the simplex grid with spacing `1/steps` in `n <= 3` dimensions.
pub fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    let h = 1.0 / steps as f64;
    match n {
        1 => vec![vec![1.0]],
        2 => (0..=steps).map(|i| vec![i as f64 * h, (steps - i) as f64 * h]).collect(),
        3 => {
            let mut out = Vec::new();
            for i in 0..=steps {
                for j in 0..=steps - i {
                    out.push(vec![i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h]);
                }
            }
            out
        }
        _ => panic!("grid oracle supports up to 3 assets"),
    }
}

fn quad(cov: &DMatrix<f64>, w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            s += w[i] * cov[(i, j)] * w[j];
        }
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Grid maximizer of `mu'w - lambda w'Sigma w`: (weights, objective).
pub fn grid_tradeoff(m: &MomentEstimate, lambda: f64) -> (Vec<f64>, f64) {
    let mu: Vec<f64> = m.mean.iter().copied().collect();
    simplex_grid(m.n_assets(), 100)
        .into_iter()
        .map(|w| {
            let obj = dot(&mu, &w) - lambda * quad(&m.covariance, &w);
            (w, obj)
        })
        .fold((vec![], f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Grid minimizer of `w'Sigma w` subject to `mu'w >= target`: (weights, variance).
pub fn grid_min_variance(m: &MomentEstimate, target: f64) -> (Vec<f64>, f64) {
    let mu: Vec<f64> = m.mean.iter().copied().collect();
    simplex_grid(m.n_assets(), 100)
        .into_iter()
        .filter(|w| dot(&mu, w) >= target - 1e-12)
        .map(|w| {
            let v = quad(&m.covariance, &w);
            (w, v)
        })
        .fold((vec![], f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

pub struct MarkowitzFixture {
    pub name: &'static str,
    pub moments: MomentEstimate,
    pub lambdas: Vec<f64>,
    /// Return targets whose grid-feasible optimum is also the continuous one.
    pub targets: Vec<f64>,
}

fn moments(mean: &[f64], cov: &[f64]) -> MomentEstimate {
    let n = mean.len();
    MomentEstimate::new(mean.to_vec(), DMatrix::from_row_slice(n, n, cov), 60).unwrap()
}

/// Every fixture with at most three assets. Scales follow daily equity returns.
pub fn markowitz_fixtures() -> Vec<MarkowitzFixture> {
    vec![
        MarkowitzFixture {
            name: "single",
            moments: moments(&[0.001], &[2e-4]),
            lambdas: vec![0.0, 1.0, 50.0],
            targets: vec![0.001],
        },
        MarkowitzFixture {
            name: "pair-uncorrelated",
            moments: moments(&[0.0012, 0.0004], &[4e-4, 0.0, 0.0, 1e-4]),
            lambdas: vec![0.0, 1.0, 5.0, 20.0, 100.0],
            targets: vec![0.0004, 0.0006, 0.0008, 0.0012],
        },
        MarkowitzFixture {
            name: "pair-correlated",
            moments: moments(&[0.0008, 0.0006], &[2.5e-4, 1.5e-4, 1.5e-4, 2.0e-4]),
            lambdas: vec![0.5, 2.0, 10.0],
            targets: vec![0.0006, 0.0007, 0.0008],
        },
        MarkowitzFixture {
            name: "triple",
            moments: moments(
                &[0.0010, 0.0005, 0.0002],
                &[4e-4, 5e-5, 0.0, 5e-5, 1.5e-4, 2e-5, 0.0, 2e-5, 5e-5],
            ),
            lambdas: vec![0.0, 0.5, 2.0, 10.0, 50.0],
            targets: vec![0.0002, 0.0005, 0.0008, 0.001],
        },
        MarkowitzFixture {
            name: "triple-dominated",
            moments: moments(
                &[0.0003, 0.0003, 0.0009],
                &[1e-4, 9e-5, 0.0, 9e-5, 1e-4, 0.0, 0.0, 0.0, 9e-4],
            ),
            lambdas: vec![1.0, 3.0, 30.0],
            targets: vec![0.0003, 0.0006, 0.0009],
        },
    ]
}

// ---------------------------------------------------- finite differences

pub const FD_STEP: f64 = 1e-5;

/// Relative error with a small absolute floor so exact zeros compare sensibly.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Central differences of `f` with respect to every parameter of `net`, in
/// `parameters()` order.
pub fn numeric_param_grad(net: &Mlp, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let n = net.parameter_count();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let orig = *probe.parameters().nth(k).unwrap();
        *probe.parameters_mut().nth(k).unwrap() = orig + FD_STEP;
        let up = f(&probe);
        *probe.parameters_mut().nth(k).unwrap() = orig - FD_STEP;
        let down = f(&probe);
        *probe.parameters_mut().nth(k).unwrap() = orig;
        out.push((up - down) / (2.0 * FD_STEP));
    }
    out
}

pub fn numeric_vec_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + FD_STEP;
            let up = f(&probe);
            probe[k] = x[k] - FD_STEP;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_err(analytic: impl IntoIterator<Item = f64>, numeric: &[f64]) -> f64 {
    let a: Vec<f64> = analytic.into_iter().collect();
    assert_eq!(a.len(), numeric.len());
    a.iter().zip(numeric).map(|(a, n)| rel_err(*a, *n)).fold(0.0, f64::max)
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

// ------------------------------------------------------------ golden file

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

/// The committed value and benchmark series.
pub fn golden_series() -> (Vec<f64>, Vec<f64>) {
    let mut rdr = csv::Reader::from_path(format!("{FIXTURES}/golden_trajectory.csv")).unwrap();
    let (mut v, mut b) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        v.push(rec[0].parse().unwrap());
        b.push(rec[1].parse().unwrap());
    }
    (v, b)
}

/// `(metric, value)` rows; `None` where the golden file says NA.
pub fn golden_metrics() -> Vec<(String, Option<f64>)> {
    let mut rdr = csv::Reader::from_path(format!("{FIXTURES}/golden_metrics.csv")).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let v = if &r[1] == "NA" { None } else { Some(r[1].parse().unwrap()) };
            (r[0].to_string(), v)
        })
        .collect()
}

pub fn report_of(values: &[f64], bench_values: Option<&[f64]>) -> kdlab::metrics::MetricsReport {
    use kdlab::metrics::{report, simple_returns, PortfolioTrajectory, ReportOptions};
    let traj = PortfolioTrajectory::from_values(dates(values.len()), values.to_vec()).unwrap();
    let bench = bench_values.map(simple_returns);
    report(&traj, bench.as_deref(), &ReportOptions::default()).unwrap()
}

// ------------------------------------------------------- gradient checks

use kdlab::kd_ddpg::{actor_objective_and_gradient, critic_input, critic_loss_and_gradient, Transition};
use kdlab::markowitz::WeightVector;
use kdlab::nn::{kd_loss, mse_loss, Activation, OutputHead};

/// Max relative error of each analytic gradient against central differences for one seed.
pub fn gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();

    for (name, act, head) in [
        ("backward linear head", Activation::Relu, OutputHead::Linear),
        ("backward simplex head", Activation::Tanh, OutputHead::SimplexSoftmax),
    ] {
        let net = Mlp::new(&[5, 7, 6, 4], act, head, seed).unwrap();
        let x = random_vec(&mut rng, 5, 1.0);
        let g = random_vec(&mut rng, 4, 1.0);
        let loss = |n: &Mlp, x: &[f64]| -> f64 { n.predict(x).unwrap().iter().zip(&g).map(|(a, b)| a * b).sum() };
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, input_grad) = net.backward(&cache, &g).unwrap();
        let num = numeric_param_grad(&net, |n| loss(n, &x));
        let num_x = numeric_vec_grad(&x, |xx| loss(&net, xx));
        let e = max_rel_err(grads.values().copied(), &num).max(max_rel_err(input_grad, &num_x));
        out.push((name, e));
    }

    let pred = random_vec(&mut rng, 6, 1.0);
    let target = random_vec(&mut rng, 6, 1.0);
    let (_, g) = mse_loss(&pred, &target).unwrap();
    let num = numeric_vec_grad(&pred, |p| mse_loss(p, &target).unwrap().0);
    out.push(("mse_loss", max_rel_err(g, &num)));

    let zs = random_vec(&mut rng, 5, 2.0);
    let zt = random_vec(&mut rng, 5, 2.0);
    let hard = random_simplex(&mut rng, 5);
    let (t, lambda) = (rand::Rng::gen_range(&mut rng, 0.5..4.0), rand::Rng::gen_range(&mut rng, 0.0..1.0));
    let (_, g) = kd_loss(&zs, &zt, &hard, t, lambda).unwrap();
    let num = numeric_vec_grad(&zs, |z| kd_loss(z, &zt, &hard, t, lambda).unwrap().0);
    out.push(("kd_loss", max_rel_err(g, &num)));

    let (state_dim, n_assets) = (6, 3);
    let critic = Mlp::new(&[state_dim + n_assets, 8, 8, 1], Activation::Tanh, OutputHead::Linear, seed + 100).unwrap();
    let batch: Vec<Transition> = (0..4)
        .map(|_| Transition {
            state: random_vec(&mut rng, state_dim, 1.0),
            action: WeightVector::new(random_simplex(&mut rng, n_assets)).unwrap(),
            reward: rand::Rng::gen_range(&mut rng, -1.0..1.0),
            next_state: random_vec(&mut rng, state_dim, 1.0),
            done: false,
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let y = random_vec(&mut rng, 4, 1.0);
    let (_, grads) = critic_loss_and_gradient(&critic, &refs, &y).unwrap();
    let num = numeric_param_grad(&critic, |c| {
        refs.iter()
            .zip(&y)
            .map(|(tr, yi)| (c.predict(&critic_input(&tr.state, tr.action.as_slice())).unwrap()[0] - yi).powi(2))
            .sum::<f64>()
            / refs.len() as f64
    });
    out.push(("critic loss", max_rel_err(grads.values().copied(), &num)));

    let actor = Mlp::new(&[state_dim, 8, n_assets], Activation::Tanh, OutputHead::SimplexSoftmax, seed + 200).unwrap();
    let states: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, state_dim, 1.0)).collect();
    let srefs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
    let (_, grads) = actor_objective_and_gradient(&actor, &critic, &srefs).unwrap();
    // the returned gradient descends, so compare against -mean Q
    let num = numeric_param_grad(&actor, |a| {
        -srefs
            .iter()
            .map(|s| critic.predict(&critic_input(s, &a.predict(s).unwrap())).unwrap()[0])
            .sum::<f64>()
            / srefs.len() as f64
    });
    out.push(("actor chain", max_rel_err(grads.values().copied(), &num)));
    out
}

// ---------------------------------------------------------------- environment

use kdlab::backtest_env::{reset, run_episode, run_episode_detailed, step, EnvConfig, EnvState, FixedWeights, RewardKind};
use kdlab::market_data::MarketPanel;

/// Geometric random walk closes, 1.0 on the first date, daily moves within ±`vol`.
pub fn random_panel(rng: &mut impl Rng, n_assets: usize, n_dates: usize, vol: f64) -> MarketPanel {
    let closes = (0..n_assets)
        .map(|_| {
            let mut p = 1.0;
            (0..n_dates)
                .map(|t| {
                    if t > 0 {
                        p *= 1.0 + rng.gen_range(-vol..vol);
                    }
                    p
                })
                .collect()
        })
        .collect();
    let assets = (0..n_assets).map(|i| format!("A{i}")).collect();
    MarketPanel::from_closes(dates(n_dates), assets, closes).unwrap()
}

fn random_policy(seed: u64, n: usize) -> impl FnMut(&MarketPanel, &EnvState) -> kdlab::Result<WeightVector> {
    let mut r = rng(seed);
    move |_: &MarketPanel, _: &EnvState| WeightVector::new(random_simplex(&mut r, n))
}

/// One randomized episode checked against every environment property; `Err` names the first
/// violation.
pub fn check_random_episode(seed: u64) -> std::result::Result<(), String> {
    let mut r = rng(seed);
    let n_assets = r.gen_range(1..=5);
    let n_dates = r.gen_range(4..=40);
    let lookback = r.gen_range(1..=3.min(n_dates - 2));
    let panel = random_panel(&mut r, n_assets, n_dates, 0.2);
    let cost = r.gen_range(0.0..=0.05);
    let env = EnvConfig {
        lookback,
        cost_rate: cost,
        reward_kind: RewardKind::LogReturn,
        initial_value: r.gen_range(0.5..1000.0),
        ..EnvConfig::default()
    };
    let err = |e: kdlab::Error| e.to_string();

    // value positivity, log-reward identity
    let rec = run_episode_detailed(&panel, &mut random_policy(seed, n_assets), &env).map_err(err)?;
    let values = &rec.trajectory.values;
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(format!("non-positive value {v}"));
    }
    let sum: f64 = rec.rewards.iter().sum();
    let log_growth = (values[values.len() - 1] / values[0]).ln();
    if (sum - log_growth).abs() > 1e-9 {
        return Err(format!("reward sum {sum} vs ln growth {log_growth}"));
    }
    for w in &rec.trajectory.weights {
        let s: f64 = w.as_slice().iter().sum();
        if (s - 1.0).abs() > 1e-9 || w.as_slice().iter().any(|x| *x < -1e-12) {
            return Err(format!("weights off simplex {:?}", w.as_slice()));
        }
    }

    // cost monotonicity: same action sequence, higher rate
    let higher = EnvConfig { cost_rate: (cost + r.gen_range(0.0..0.01)).min(0.05), ..env.clone() };
    let lo = run_episode(&panel, &mut random_policy(seed, n_assets), &env).map_err(err)?;
    let hi = run_episode(&panel, &mut random_policy(seed, n_assets), &higher).map_err(err)?;
    if hi.values.last() > lo.values.last() {
        return Err(format!("cost {} beat cost {}", higher.cost_rate, cost));
    }

    // drift renormalization, step by step
    let mut state = reset(&panel, lookback, &env).map_err(err)?;
    let mut policy = random_policy(seed ^ 0xA5, n_assets);
    loop {
        let a = policy(&panel, &state).map_err(err)?;
        let out = step(&state, &a, &panel, &env).map_err(err)?;
        let s: f64 = out.state.current_weights.as_slice().iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(format!("drifted weights sum to {s}"));
        }
        state = out.state;
        if out.done {
            break;
        }
    }

    // zero-cost constant weights against the closed-form product
    let w = WeightVector::new(random_simplex(&mut r, n_assets)).unwrap();
    let free = EnvConfig { cost_rate: 0.0, ..env.clone() };
    let traj = run_episode(&panel, &mut FixedWeights { weights: w.clone(), start: lookback }, &free).map_err(err)?;
    let mut v = env.initial_value;
    for (k, t) in (lookback + 1..n_dates).enumerate() {
        v *= w.dot(&panel.relatives_at(t));
        if ((traj.values[k + 1] - v) / v).abs() > 1e-10 {
            return Err(format!("CRP closed form {v} vs {}", traj.values[k + 1]));
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ baselines

use kdlab::baselines::{run_bah, run_crp, run_eg, solve_bcrp};

pub fn zero_cost() -> EnvConfig {
    EnvConfig { cost_rate: 0.0, ..EnvConfig::default() }
}

/// EG(0) vs uniform CRP bitwise, BCRP against each corner, constant weights against the
/// closed-form product.
pub fn check_baseline_identities(seed: u64) -> std::result::Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=4);
    let n_dates = r.gen_range(3..=60);
    let panel = random_panel(&mut r, n, n_dates, 0.1);
    let err = |e: kdlab::Error| e.to_string();
    let costly = EnvConfig { cost_rate: 0.002, ..EnvConfig::default() };
    for env in [zero_cost(), costly] {
        let eg = run_eg(&panel, 0.0, &env).map_err(err)?;
        let crp = run_crp(&panel, &WeightVector::uniform(n), &env).map_err(err)?;
        if eg != crp {
            return Err("EG(0) differs from uniform CRP".into());
        }
    }

    let free = zero_cost();
    let bcrp = solve_bcrp(&panel).map_err(err)?;
    let best = *run_crp(&panel, &bcrp, &free).map_err(err)?.values.last().unwrap();
    for i in 0..n {
        let bah = *run_bah(&panel, &WeightVector::unit(n, i), &free).map_err(err)?.values.last().unwrap();
        if best < bah - 1e-6 {
            return Err(format!("BCRP {best} below B&H({i}) {bah}"));
        }
    }

    let w = WeightVector::new(random_simplex(&mut r, n)).unwrap();
    let traj = run_episode(&panel, &mut FixedWeights { weights: w.clone(), start: 0 }, &free).map_err(err)?;
    let mut v = free.initial_value;
    for t in 1..panel.n_dates() {
        v *= w.dot(&panel.relatives_at(t));
        if ((traj.values[t] - v) / v).abs() > 1e-10 {
            return Err(format!("closed form {v} vs {}", traj.values[t]));
        }
    }
    Ok(())
}
