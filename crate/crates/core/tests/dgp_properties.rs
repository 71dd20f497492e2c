use egc_core::dgp::{
    mc_study, p3_analytic_oracles, simulate_dgp, skewed_t_sample, DgpSpec, DgpTag, Innovations,
    McSettings, TestKind, TestSelection, DEFAULT_BURN_IN, GARCH, SKEW_T_NU, SKEW_T_XI,
};
use egc_core::gc::TestConfig;
use egc_core::stats::{autocorrelation_lag1, kendall_tau, least_squares, mean, skewness, variance};
use egc_core::{ExpectileLevel, Executor, RandomStream, Sequential};

fn panel(tag: DgpTag, t_len: usize, seed: u64) -> egc_core::mvine::SeriesPanel {
    simulate_dgp(&DgpSpec::new(tag), t_len, &RandomStream::new(seed)).unwrap()
}

#[test]
fn frozen_constants() {
    // (intercept, ar_x, ar_y, ar_z, lag_y, lag_z, interaction, garch)
    let table = [
        (DgpTag::S1, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, false),
        (DgpTag::S2, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, true),
        (DgpTag::P1, 0.0, 0.5, 0.5, 0.5, 0.2, 0.2, 0.0, false),
        (DgpTag::P2, 0.0, 0.5, 0.25, 0.25, 0.0, 0.0, 5.0, false),
        (DgpTag::P3, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 5.0, false),
        (DgpTag::P4, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 2.5, true),
    ];
    for (tag, c, ax, ay, az, ly, lz, g, garch) in table {
        let s = DgpSpec::new(tag);
        assert_eq!(
            (s.intercept, s.ar_x, s.ar_y, s.ar_z, s.lag_y, s.lag_z, s.interaction),
            (c, ax, ay, az, ly, lz, g),
            "{tag}"
        );
        assert_eq!(matches!(s.innovations, Innovations::GarchSkewT { .. }), garch, "{tag}");
        assert_eq!(s.burn_in, DEFAULT_BURN_IN);
        assert_eq!(tag.is_null(), matches!(tag, DgpTag::S1 | DgpTag::S2));
    }
    assert_eq!((GARCH.omega, GARCH.alpha, GARCH.beta), (0.01, 0.08, 0.87));
    assert!(GARCH.alpha + GARCH.beta < 1.0);
    assert_eq!((SKEW_T_NU, SKEW_T_XI), (5.0, -1.5));
}

#[test]
fn s1_matches_the_ar1_oracles() {
    let p = panel(DgpTag::S1, 10_000, 1);
    let x = p.column(0);
    assert!((autocorrelation_lag1(x) - 0.5).abs() < 0.05);
    // sigma^2 / (1 - phi^2)
    assert!((variance(x) - 1.0 / 0.75).abs() < 0.05, "variance {}", variance(x));
}

#[test]
fn null_designs_have_independent_columns() {
    for tag in [DgpTag::S1, DgpTag::S2] {
        let p = panel(tag, 10_000, 2);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let t = kendall_tau(p.column(a), p.column(b));
            assert!(t.abs() < 0.04, "{tag} columns {a}, {b}: tau {t}");
        }
    }
}

#[test]
fn garch_paths_are_finite() {
    for tag in [DgpTag::S2, DgpTag::P4] {
        let p = panel(tag, 5000, 3);
        for j in 0..3 {
            let col = p.column(j);
            assert!(col.iter().all(|v| v.is_finite()));
            let v = variance(col);
            assert!(v.is_finite() && v > 0.0);
        }
    }
    // X of S2 is intercept + GARCH noise with unconditional variance 0.2
    let p = panel(DgpTag::S2, 20_000, 4);
    let x = p.column(0);
    assert!((mean(x) - 0.05).abs() < 0.02);
    assert!((variance(x) - 0.2).abs() < 0.03, "variance {}", variance(x));
}

#[test]
fn p3_has_no_linear_cross_lag_but_an_interaction() {
    // Var(X_t Y_t-1) is about 110, so the covariance needs a long path to be
    // resolved to 0.05
    let long = panel(DgpTag::P3, 1_000_000, 5);
    let (x, y) = (long.column(0), long.column(1));
    let n = x.len() - 1;
    let (mx, my) = (mean(&x[1..]), mean(&y[..n]));
    let cov: f64 = (0..n).map(|t| (x[t + 1] - mx) * (y[t] - my)).sum::<f64>() / n as f64;
    assert!(cov.abs() < 0.05, "cov(X_t, Y_t-1) = {cov}");

    let p = panel(DgpTag::P3, 10_000, 5);
    let (x, y, z) = (p.column(0), p.column(1), p.column(2));
    let n = x.len() - 1;
    let mut design = Vec::with_capacity(3 * n);
    for t in 0..n {
        design.extend_from_slice(&[1.0, x[t], y[t] * z[t]]);
    }
    let (beta, _) = least_squares(&design, 3, &x[1..]).unwrap();
    assert!((beta[1] - 0.5).abs() < 0.1 && (beta[2] - 5.0).abs() < 0.1, "{beta:?}");
}

#[test]
fn p3_analytic_oracles_hold() {
    let o = p3_analytic_oracles(1_000_000, &RandomStream::new(6)).unwrap();
    assert!((o.mse_restricted - 26.0).abs() < 0.5, "{}", o.mse_restricted);
    assert!((o.mse_unrestricted - 1.0).abs() < 0.05, "{}", o.mse_unrestricted);
    assert!(o.standardized_mean.abs() < 0.01);
    assert!((o.standardized_variance - 1.0).abs() < 0.01);
    assert!(o.standardized_ks < 0.005);
    assert!(o.half_expectile_offset.abs() < 0.02);
    assert!(p3_analytic_oracles(10, &RandomStream::new(6)).is_err());
}

#[test]
fn skewed_t_is_standardized_and_left_skewed() {
    let n = 1_000_000;
    let s = skewed_t_sample(5.0, -1.5, &mut RandomStream::new(7), n).unwrap();
    assert!(mean(&s).abs() < 0.01, "mean {}", mean(&s));
    assert!((variance(&s) - 1.0).abs() < 0.02, "variance {}", variance(&s));
    assert!(skewness(&s) < 0.0);
    let mirrored = skewed_t_sample(5.0, 1.5, &mut RandomStream::new(7), n).unwrap();
    assert!(skewness(&mirrored) > 0.0);
    let sym = skewed_t_sample(5.0, 1.0, &mut RandomStream::new(8), n).unwrap();
    assert!(skewness(&sym).abs() < 0.05, "skewness {}", skewness(&sym));
    assert!(skewed_t_sample(2.0, 1.5, &mut RandomStream::new(7), 10).is_err());
}

#[test]
fn simulation_is_deterministic_and_checks_length() {
    for tag in DgpTag::ALL {
        let a = panel(tag, 200, 9);
        assert_eq!(a, panel(tag, 200, 9));
        assert_ne!(a, panel(tag, 200, 10));
        assert_eq!(a.names(), ["x", "y", "z"]);
    }
    assert!(simulate_dgp(&DgpSpec::new(DgpTag::S1), 19, &RandomStream::new(0)).is_err());
}

// runs tasks last-to-first, to show the report does not depend on scheduling
struct Reversed;

impl Executor for Reversed {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<(usize, T)> = (0..n).rev().map(|i| (i, f(i))).collect();
        out.sort_by_key(|p| p.0);
        out.into_iter().map(|p| p.1).collect()
    }
}

#[test]
fn mc_study_shape_and_determinism() {
    let taus = vec![ExpectileLevel::new(0.5).unwrap(), ExpectileLevel::new(0.9).unwrap()];
    let mut config = TestConfig::new(taus[0]);
    config.n_bootstrap = 5;
    config.n_predictions = 20;
    config.seed = 77;
    let settings = McSettings {
        dgps: vec![DgpTag::S1, DgpTag::P1],
        taus,
        lengths: vec![60],
        replications: 3,
        alpha: 0.05,
        tests: TestSelection {
            joint: true,
            pairwise: true,
            f_test: true,
        },
        burn_in: 100,
        config,
    };
    let a = mc_study(&settings, &Sequential).unwrap();
    let b = mc_study(&settings, &Reversed).unwrap();
    assert_eq!(a, b);
    // per design: 2 levels x (joint + 2 pairwise) + 1 F-test
    assert_eq!(a.cells.len(), 2 * (2 * 3 + 1));
    for c in &a.cells {
        assert!((0.0..=1.0).contains(&c.rate));
        assert_eq!(c.replications, 3);
        assert_eq!(c.tau.is_none(), c.test == TestKind::FTest);
    }
    assert!(a.cell(DgpTag::P1, Some(0.9), 60, &TestKind::Pairwise("z".into())).is_some());
    assert!(a.cell(DgpTag::S1, None, 60, &TestKind::FTest).is_some());

    let mut empty = settings.clone();
    empty.replications = 0;
    assert!(mc_study(&empty, &Sequential).is_err());
}
