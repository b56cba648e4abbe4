use ndarray::Array2;
use proptest::prelude::*;

use volrisk::backtest::{ind_statistic, pof_statistic, TransitionCounts};
use volrisk::bachelier::{check_no_arbitrage, price, price_curve, vega, PriceCurve};
use volrisk::fhs::{
    empirical_quantile, ewma_vol, forecast_xi_quantile, rolling_quantile_with, EwmaParams,
};
use volrisk::kldecomp::{decompose_with, project_with, solve_gevp, BasisSpec};
use volrisk::series::correlation;
use volrisk::volgrid::{center, log_returns, read_cube_csv, write_cube_csv, Axis, FieldGrid, FieldSeries, VolCubeSeries};
use volrisk::{Execution, TimeSeries};

fn days(n: usize) -> Vec<chrono::NaiveDate> {
    TimeSeries::from_values(vec![0.0; n]).dates
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn price_bounds(m in -0.05f64..0.05, sigma in 1e-4f64..0.03, t in 0.05f64..30.0) {
        let f = 0.02;
        let p = price(f, f - m, sigma, t).unwrap();
        prop_assert!(p >= m.max(0.0) - 1e-15);
        prop_assert!(p <= m.max(0.0) + sigma * t.sqrt() * 0.3989422804014327 + 1e-15);
        prop_assert!(vega(f, f - m, sigma, t).unwrap() >= 0.0);
    }

    #[test]
    fn price_increases_with_vol(m in -0.03f64..0.03, s1 in 1e-4f64..0.02, ds in 1e-5f64..0.01, t in 0.1f64..20.0) {
        let lo = price(0.0, -m, s1, t).unwrap();
        let hi = price(0.0, -m, s1 + ds, t).unwrap();
        prop_assert!(hi >= lo);
    }

    #[test]
    fn flat_smile_is_arbitrage_free(sigma in 1e-3f64..0.02, t in 0.25f64..30.0, n in 3usize..40) {
        let strikes: Vec<f64> = (0..n).map(|i| -0.01 + 0.05 * i as f64 / (n - 1) as f64).collect();
        let curve = price_curve(0.015, &strikes, &[-0.1, 0.1], &[sigma, sigma], t).unwrap();
        prop_assert!(check_no_arbitrage(&curve, 1e-10).unwrap().is_free());
    }

    #[test]
    fn injected_bump_is_flagged(n in 5usize..30, at in 1usize..4, bump in 1e-6f64..1e-3) {
        let strikes: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut prices: Vec<f64> = strikes.iter().map(|k| (10.0 - k).max(0.0) + 0.1).collect();
        prices[at] += bump;
        let r = check_no_arbitrage(&PriceCurve::new(strikes, prices).unwrap(), 1e-10).unwrap();
        prop_assert!(!r.convex_ok);
        prop_assert!(r.violations.iter().any(|v| v.index == at));
    }

    #[test]
    fn quantile_is_monotone_and_bounded(mut xs in prop::collection::vec(-10.0f64..10.0, 1..300), a in 0.001f64..0.999, b in 0.001f64..0.999) {
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ql = empirical_quantile(&xs, lo);
        let qh = empirical_quantile(&xs, hi);
        prop_assert!(ql <= qh);
        prop_assert!(ql >= xs[0] && qh <= xs[xs.len() - 1]);
    }

    #[test]
    fn rolling_quantiles_ordered_every_date(xs in prop::collection::vec(-5.0f64..5.0, 30..120), window in 5usize..25) {
        let x = TimeSeries::from_values(xs);
        let q = rolling_quantile_with(&x, window, &[0.01, 0.2, 0.5, 0.99], Execution::Sequential).unwrap();
        let p = rolling_quantile_with(&x, window, &[0.01, 0.2, 0.5, 0.99], Execution::Parallel).unwrap();
        prop_assert_eq!(&q, &p);
        for t in 0..q.len() {
            for w in q.values.windows(2) {
                prop_assert!(w[0][t] <= w[1][t]);
            }
        }
    }

    #[test]
    fn affine_forecast_preserves_order(xs in prop::collection::vec(-3.0f64..3.0, 40..80), beta in -0.95f64..0.95) {
        let x = TimeSeries::from_values(xs);
        let rq = rolling_quantile_with(&x, 20, &[0.05, 0.95], Execution::Sequential).unwrap();
        let q = forecast_xi_quantile(&x, beta, &rq).unwrap();
        for (lo, hi) in q.values[0].iter().zip(&q.values[1]) {
            prop_assert!(lo <= hi);
        }
    }

    #[test]
    fn ewma_is_positive(xs in prop::collection::vec(-1.0f64..1.0, 10..100), theta in 0.01f64..0.99) {
        let p = EwmaParams { theta, window: 5 };
        let v = ewma_vol(&TimeSeries::from_values(xs), &p).unwrap();
        prop_assert!(v.values.iter().all(|s| *s > 0.0 && s.is_finite()));
    }

    #[test]
    fn backtest_statistics_are_valid(t00 in 0u64..3000, t01 in 0u64..60, t11 in 0u64..10) {
        let c = TransitionCounts::from_pairs(t00, t01, t01, t11);
        prop_assume!(c.pairs() > 0);
        let ind = ind_statistic(&c).unwrap();
        prop_assert!(ind.stat >= 0.0 && (0.0..=1.0).contains(&ind.pvalue));
        let pof = pof_statistic(c.t0, c.t1, 0.01).unwrap();
        prop_assert!(pof.stat >= 0.0 && (0.0..=1.0).contains(&pof.pvalue));
    }

    #[test]
    fn generalized_eigenpairs(entries in prop::collection::vec(-1.0f64..1.0, 25), diag in prop::collection::vec(0.5f64..2.0, 5)) {
        let m = Array2::from_shape_vec((5, 5), entries).unwrap();
        let a = &m + &m.t();
        let mut b = Array2::from_diag(&ndarray::Array1::from(diag));
        b[[0, 1]] = 0.1;
        b[[1, 0]] = 0.1;
        let pairs = solve_gevp(&a, &b).unwrap();
        for w in pairs.windows(2) {
            prop_assert!(w[0].value >= w[1].value);
        }
        for p in &pairs {
            let d = ndarray::Array1::from(p.coeffs.clone());
            let r = a.dot(&d) - b.dot(&d) * p.value;
            prop_assert!(r.iter().all(|x| x.abs() < 1e-10));
            prop_assert!((d.dot(&b.dot(&d)) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn projections_uncorrelated_on_arbitrary_fields(
        seed_vals in prop::collection::vec(-0.05f64..0.05, 40 * 9),
        n_pts in 5usize..10,
    ) {
        let points: Vec<f64> = (0..n_pts).map(|i| -0.02 + 0.04 * i as f64 / (n_pts - 1) as f64).collect();
        let grid = FieldGrid::line(Axis::Moneyness, points);
        let values = Array2::from_shape_fn((40, n_pts), |(t, j)| 0.006 * seed_vals[t * 9 + j].exp());
        let fs = FieldSeries::new(days(40), grid, values);
        let rf = center(&log_returns(&fs).unwrap()).unwrap();
        let basis = BasisSpec::uniform(rf.grid(), 4);
        let model = decompose_with(&rf, &basis, 3, Execution::Sequential).unwrap();
        let par = decompose_with(&rf, &basis, 3, Execution::Parallel).unwrap();
        prop_assert_eq!(&model, &par);
        let proj = project_with(&rf, &model, 3, Execution::Sequential).unwrap();
        for i in 0..3 {
            for j in 0..i {
                prop_assert!(correlation(&proj.xi[i], &proj.xi[j]).abs() < 1e-8);
            }
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((model.inner(&model.modes[i].values, &model.modes[j].values) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cube_csv_round_trip(vols in prop::collection::vec(1e-4f64..0.05, 2 * 3 * 2), fwd in prop::collection::vec(-0.01f64..0.05, 2 * 2)) {
        let cube = VolCubeSeries::new(
            days(2),
            vec![-0.01, 0.0, 0.01],
            vec![1.0, 5.0],
            vec![10.0],
            vols,
            Some(fwd),
        ).unwrap();
        let mut buf = Vec::new();
        write_cube_csv(&cube, &mut buf).unwrap();
        let back = read_cube_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, cube);
    }
}
