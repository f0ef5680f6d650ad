mod common;

use common::*;
use kdlab::metrics::*;
use proptest::prelude::*;

#[test]
fn golden_fixture() {
    let (v, b) = golden_series();
    let r = report_of(&v, Some(&b));
    let golden = golden_metrics();
    assert_eq!(golden.len(), 12);
    for ((name, expected), (lib_name, got)) in golden.iter().zip(METRIC_NAMES.iter().zip(r.values())) {
        assert_eq!(name, lib_name);
        match (expected, got) {
            (None, None) => {}
            (Some(e), Some(g)) => assert!(close(g, *e, 1e-9), "{name}: {g} vs {e}"),
            _ => panic!("{name}: applicability differs ({expected:?} vs {got:?})"),
        }
    }
    assert!((r.total_return - 0.21).abs() < 1e-12);
    assert!((r.max_drawdown + 0.10).abs() < 1e-12);
}

#[test]
fn oracle_agrees_on_random_trajectories() {
    let mut rng = rng(2024);
    for _ in 0..100 {
        let n = rand::Rng::gen_range(&mut rng, 3..200);
        let mut v = vec![100.0];
        let mut b = vec![50.0];
        for _ in 1..n {
            v.push(v.last().unwrap() * (1.0 + rand::Rng::gen_range(&mut rng, -0.04..0.045)));
            b.push(b.last().unwrap() * (1.0 + rand::Rng::gen_range(&mut rng, -0.03..0.032)));
        }
        let got = report_of(&v, Some(&b)).values();
        let want = oracle_metrics(&v, Some(&simple_returns(&b)));
        for (i, (g, w)) in got.iter().zip(want).enumerate() {
            match (g, w) {
                (Some(g), Some(w)) => assert!(close(*g, w, 1e-9), "{}: {g} vs {w}", METRIC_NAMES[i]),
                (None, None) => {}
                _ => panic!("{} applicability differs", METRIC_NAMES[i]),
            }
        }
    }
}

#[test]
fn without_benchmark_relative_fields_are_not_applicable() {
    let (v, _) = golden_series();
    let r = report_of(&v, None);
    assert!(r.beta.is_none() && r.alpha.is_none() && r.information_ratio.is_none());
}

#[test]
fn absolute_drawdown_is_available() {
    assert_eq!(max_drawdown_absolute(&[100.0, 120.0, 90.0, 130.0]).unwrap(), 30.0);
    assert_eq!(max_drawdown(&[100.0, 120.0, 90.0, 130.0]).unwrap(), 0.25);
}

fn value_path() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.05f64..0.05, 3..80).prop_map(|rs| {
        let mut v = vec![1.0];
        for r in rs {
            v.push(v.last().unwrap() * (1.0 + r));
        }
        v
    })
}

proptest! {
    #[test]
    fn scale_invariance(v in value_path(), c in 0.01f64..1000.0) {
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let a = report_of(&v, None).values();
        let b = report_of(&scaled, None).values();
        for (x, y) in a.iter().zip(b) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!(close(*x, y, 1e-9)),
                (None, None) => {}
                _ => prop_assert!(false, "applicability changed under scaling"),
            }
        }
    }

    #[test]
    fn sharpe_is_scale_free(r in prop::collection::vec(-0.05f64..0.05, 3..60), c in 0.1f64..10.0) {
        let scaled: Vec<f64> = r.iter().map(|x| x * c).collect();
        match (sharpe(&r, 0.0, 252.0), sharpe(&scaled, 0.0, 252.0)) {
            (Ok(a), Ok(b)) => prop_assert!(close(a, b, 1e-9)),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn drawdown_bounds(v in value_path()) {
        let d = max_drawdown(&v).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        let nondecreasing = v.windows(2).all(|w| w[1] >= w[0]);
        prop_assert_eq!(d == 0.0, nondecreasing);
    }

    #[test]
    fn win_rate_complement(r in prop::collection::vec(-0.05f64..0.05, 1..60)) {
        let wr = win_rate(&r).unwrap();
        let losers = r.iter().filter(|x| **x <= 0.0).count() as f64 / r.len() as f64;
        prop_assert_eq!(wr + losers, 1.0);
    }

    #[test]
    fn report_invariants(v in value_path()) {
        let r = report_of(&v, None);
        prop_assert!((0.0..=1.0).contains(&r.win_rate));
        prop_assert!((-1.0..=0.0).contains(&r.max_drawdown));
        prop_assert!(r.volatility >= 0.0);
        if let Some(c) = r.calmar {
            prop_assert!(close(c, r.annualized_return / -r.max_drawdown, 1e-12));
        }
    }

    #[test]
    fn returns_reconstruct_values(v in value_path()) {
        let traj = PortfolioTrajectory::from_values(dates(v.len()), v.clone()).unwrap();
        for (t, r) in traj.period_returns.iter().enumerate() {
            prop_assert!((r - (v[t + 1] / v[t] - 1.0)).abs() <= 1e-12);
        }
    }
}
