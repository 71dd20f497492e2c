use std::f64::consts::PI;

use egc_core::bicop::{
    fit_mle, select_family, BivariateCopula, CopulaFamily, FamilyTag, PairSample, Rotation,
};
use egc_core::math::{norm_cdf, norm_quantile};
use egc_core::stats::{kendall_tau, ks_uniform};
use egc_core::RandomStream;
use proptest::prelude::*;

fn settings() -> Vec<BivariateCopula> {
    let mut out = vec![BivariateCopula::independence()];
    for rho in [-0.5, 0.3, 0.8] {
        out.push(BivariateCopula::gaussian(rho).unwrap());
    }
    for (rho, nu) in [(0.5, 4.0), (-0.3, 7.0), (0.7, 10.0)] {
        out.push(BivariateCopula::student_t(rho, nu).unwrap());
    }
    for rot in [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270] {
        for theta in [0.5, 1.2, 2.0] {
            out.push(BivariateCopula::clayton(theta, rot).unwrap());
        }
        for theta in [1.2, 1.7, 2.5] {
            out.push(BivariateCopula::gumbel(theta, rot).unwrap());
        }
    }
    for theta in [-5.0, 2.0, 8.0] {
        out.push(BivariateCopula::frank(theta).unwrap());
    }
    out
}

#[test]
fn densities_integrate_to_one() {
    let k = 400;
    for c in settings() {
        let mut total = 0.0;
        for i in 0..k {
            let u = (i as f64 + 0.5) / k as f64;
            for j in 0..k {
                let v = (j as f64 + 0.5) / k as f64;
                total += c.density(u, v).unwrap();
            }
        }
        total /= (k * k) as f64;
        assert!((total - 1.0).abs() < 1e-3, "{c:?}: integral {total}");
    }
}

#[test]
fn h_inverse_round_trip() {
    let mut rng = RandomStream::new(11);
    for c in settings() {
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let w = rng.uniform();
            let v = rng.uniform();
            let u = c.h_inverse(w, v).unwrap();
            worst = worst.max((c.h_function(u, v).unwrap() - w).abs());
        }
        assert!(worst <= 1e-8, "{c:?}: worst round-trip error {worst}");
    }
}

#[test]
fn density_examples() {
    let c = BivariateCopula::independence();
    assert_eq!(c.density(0.3, 0.9).unwrap(), 1.0);
    let g0 = BivariateCopula::gaussian(0.0).unwrap();
    assert!((g0.density(0.2, 0.7).unwrap() - 1.0).abs() < 1e-14);
    let g = BivariateCopula::gaussian(0.5).unwrap();
    assert!((g.density(0.5, 0.5).unwrap() - 1.0 / (1.0f64 - 0.25).sqrt()).abs() < 1e-12);
    assert!(g.density(0.0, 0.5).is_err());
    assert!(g.density(0.5, 1.0).is_err());
    assert!(g.h_function(1.5, 0.5).is_err());
}

#[test]
fn densities_are_positive() {
    for c in settings() {
        for &u in &[1e-6, 0.01, 0.5, 0.99, 1.0 - 1e-6] {
            for &v in &[1e-6, 0.01, 0.5, 0.99, 1.0 - 1e-6] {
                let d = c.density(u, v).unwrap();
                assert!(d > 0.0 && d.is_finite(), "{c:?} at ({u}, {v}): {d}");
            }
        }
    }
}

#[test]
fn h_function_limits() {
    for c in settings() {
        for &v in &[0.05, 0.5, 0.95] {
            assert!(c.h_function(1e-9, v).unwrap() < 1e-3, "{c:?}");
            assert!(c.h_function(1.0 - 1e-9, v).unwrap() > 1.0 - 1e-3, "{c:?}");
        }
    }
    let ind = BivariateCopula::independence();
    assert_eq!(ind.h_function(0.37, 0.81).unwrap(), 0.37);
    assert_eq!(ind.h_inverse(0.37, 0.81).unwrap(), 0.37);
}

// h(u | v) = int_0^u c(s, v) ds by composite Simpson on a log-spaced start.
fn h_by_quadrature(c: &BivariateCopula, u: f64, v: f64) -> f64 {
    let n = 20_000;
    let h = u / n as f64;
    let f = |s: f64| c.density(s.max(1e-12), v).unwrap();
    let mut acc = f(1e-12) + f(u);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn gaussian_conditional_direction() {
    // strong positive dependence: a small V pulls U down, a large V pulls it up
    let g = BivariateCopula::gaussian(0.9).unwrap();
    let low = g.h_function(0.5, 0.01).unwrap();
    let high = g.h_function(0.5, 0.99).unwrap();
    assert!(low > 0.5 && high < 0.5);
    assert!((low - h_by_quadrature(&g, 0.5, 0.01)).abs() < 1e-4);
    assert!((high - h_by_quadrature(&g, 0.5, 0.99)).abs() < 1e-4);
}

#[test]
fn gaussian_h_inverse_matches_closed_form_and_bisection() {
    let rho: f64 = 0.65;
    let g = BivariateCopula::gaussian(rho).unwrap();
    let mut rng = RandomStream::new(5);
    for _ in 0..200 {
        let w = rng.uniform();
        let v = rng.uniform();
        let closed = norm_cdf(norm_quantile(w) * (1.0 - rho * rho).sqrt() + rho * norm_quantile(v));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g.h_function(mid, v).unwrap() < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let got = g.h_inverse(w, v).unwrap();
        assert!((got - closed).abs() < 1e-9, "closed form {closed}, got {got}");
        assert!((got - 0.5 * (lo + hi)).abs() < 1e-8);
    }
}

// bivariate normal cdf through Plackett's identity
fn binorm_cdf(a: f64, b: f64, rho: f64) -> f64 {
    let n = 2000;
    let h = rho / n as f64;
    let f = |r: f64| {
        let q = 1.0 - r * r;
        (-(a * a - 2.0 * r * a * b + b * b) / (2.0 * q)).exp() / q.sqrt()
    };
    let mut acc = f(0.0) + f(rho);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    norm_cdf(a) * norm_cdf(b) + acc * h / 3.0 / (2.0 * PI)
}

fn closed_cdf(tag: FamilyTag, theta: f64, u: f64, v: f64) -> f64 {
    match tag {
        FamilyTag::Gaussian => binorm_cdf(norm_quantile(u), norm_quantile(v), theta),
        FamilyTag::Clayton => (u.powf(-theta) + v.powf(-theta) - 1.0).powf(-1.0 / theta),
        FamilyTag::Gumbel => {
            (-((-u.ln()).powf(theta) + (-v.ln()).powf(theta)).powf(1.0 / theta)).exp()
        }
        FamilyTag::Frank => {
            let num = ((-theta * u).exp() - 1.0) * ((-theta * v).exp() - 1.0);
            -(1.0 + num / ((-theta).exp() - 1.0)).ln() / theta
        }
        _ => unreachable!(),
    }
}

#[test]
fn h_is_the_cdf_derivative() {
    let cases = [
        (FamilyTag::Gaussian, 0.6),
        (FamilyTag::Gaussian, -0.4),
        (FamilyTag::Clayton, 2.0),
        (FamilyTag::Gumbel, 1.8),
        (FamilyTag::Frank, 4.0),
        (FamilyTag::Frank, -3.0),
    ];
    let step = 1e-5;
    for (tag, theta) in cases {
        for rot in [Rotation::R0, Rotation::R180] {
            if rot == Rotation::R180 && !tag.allows_rotation() {
                continue;
            }
            let c = BivariateCopula::new(CopulaFamily::new(tag, rot).unwrap(), &[theta]).unwrap();
            let cdf = |u: f64, v: f64| match rot {
                Rotation::R180 => u + v - 1.0 + closed_cdf(tag, theta, 1.0 - u, 1.0 - v),
                _ => closed_cdf(tag, theta, u, v),
            };
            let mut worst: f64 = 0.0;
            for i in 1..=20 {
                for j in 1..=20 {
                    let u = i as f64 / 21.0;
                    let v = j as f64 / 21.0;
                    let fd = (cdf(u, v + step) - cdf(u, v - step)) / (2.0 * step);
                    worst = worst.max((fd - c.h_function(u, v).unwrap()).abs());
                }
            }
            assert!(worst <= 1e-5, "{tag:?} {rot:?}: worst {worst}");
        }
    }
}

#[test]
fn half_turn_rotation_mirrors_the_base_density() {
    for theta in [0.7, 2.5] {
        let base = BivariateCopula::clayton(theta, Rotation::R0).unwrap();
        let rot = BivariateCopula::clayton(theta, Rotation::R180).unwrap();
        for &(u, v) in &[(0.1, 0.2), (0.5, 0.9), (0.77, 0.03)] {
            assert_eq!(rot.density(u, v).unwrap(), base.density(1.0 - u, 1.0 - v).unwrap());
        }
    }
    for theta in [1.3, 3.0] {
        let base = BivariateCopula::gumbel(theta, Rotation::R0).unwrap();
        let rot = BivariateCopula::gumbel(theta, Rotation::R180).unwrap();
        for &(u, v) in &[(0.1, 0.2), (0.5, 0.9), (0.77, 0.03)] {
            assert_eq!(rot.density(u, v).unwrap(), base.density(1.0 - u, 1.0 - v).unwrap());
        }
    }
}

#[test]
fn samples_have_uniform_margins_and_expected_concordance() {
    let n = 10_000;
    let cases = [
        (BivariateCopula::independence(), 0.0),
        // tau = (2 / pi) asin(rho)
        (BivariateCopula::gaussian(std::f64::consts::FRAC_1_SQRT_2).unwrap(), 0.5),
    ];
    for (c, tau) in cases {
        let pairs = c.sample_pair(&mut RandomStream::new(3), n);
        let u: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        assert!((kendall_tau(&u, &v) - tau).abs() < 0.03);
        assert!(ks_uniform(&u) < 0.02);
        assert!(ks_uniform(&v) < 0.02);
    }
}

#[test]
fn mle_recovers_generating_parameters() {
    let n = 2000;
    let g = BivariateCopula::gaussian(0.6).unwrap();
    let pairs = g.sample_pair(&mut RandomStream::new(21), n);
    let (fit, _) = fit_mle(CopulaFamily::new(FamilyTag::Gaussian, Rotation::R0).unwrap(), &pairs).unwrap();
    let rho = fit.parameters()[0];
    assert!((0.54..=0.66).contains(&rho), "rho {rho}");

    let c = BivariateCopula::clayton(2.0, Rotation::R0).unwrap();
    let pairs = c.sample_pair(&mut RandomStream::new(22), n);
    let (fit, _) = fit_mle(CopulaFamily::new(FamilyTag::Clayton, Rotation::R0).unwrap(), &pairs).unwrap();
    let theta = fit.parameters()[0];
    assert!((1.7..=2.3).contains(&theta), "theta {theta}");
    // the tau-inversion estimate agrees with the MLE
    let u: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let tau = kendall_tau(&u, &v);
    assert!((2.0 * tau / (1.0 - tau) - theta).abs() < 0.3);

    let t = BivariateCopula::student_t(0.5, 4.0).unwrap();
    let pairs = t.sample_pair(&mut RandomStream::new(23), n);
    let (fit, _) = fit_mle(CopulaFamily::new(FamilyTag::StudentT, Rotation::R0).unwrap(), &pairs).unwrap();
    let p = fit.parameters();
    assert!((p[0] - 0.5).abs() < 0.06 && (3.0..=7.0).contains(&p[1]), "{p:?}");
}

#[test]
fn independent_data_fits_near_independence() {
    let pairs = BivariateCopula::independence().sample_pair(&mut RandomStream::new(31), 2000);
    for family in CopulaFamily::default_catalog() {
        let (fit, ll) = fit_mle(family, &pairs).unwrap();
        assert!(fit.kendall_tau().abs() < 0.05, "{family:?}: tau {}", fit.kendall_tau());
        assert!((0.0..6.0).contains(&ll), "{family:?}: loglik {ll}");
    }
}

// Frank: tau = 1 - 4 (1 - D1(theta)) / theta, inverted by bisection
fn frank_from_tau(tau: f64) -> f64 {
    let debye = |x: f64| {
        let n = 2000;
        let h = x / n as f64;
        let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
        let mut acc = f(0.0) + f(x);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0 / x
    };
    let tau_of = |th: f64| 1.0 - 4.0 * (1.0 - debye(th)) / th;
    let (mut lo, mut hi) = (1e-6, 100.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tau_of(mid) < tau.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) * tau.signum()
}

#[test]
fn mle_improves_on_the_tau_inversion_start() {
    let sources = [
        BivariateCopula::gaussian(0.4).unwrap(),
        BivariateCopula::clayton(1.2, Rotation::R0).unwrap(),
        BivariateCopula::gumbel(1.6, Rotation::R0).unwrap(),
        BivariateCopula::frank(3.0).unwrap(),
        BivariateCopula::student_t(0.3, 5.0).unwrap(),
    ];
    for (k, src) in sources.iter().enumerate() {
        let pairs = src.sample_pair(&mut RandomStream::new(40 + k as u64), 800);
        let mut sample = PairSample::from_pairs(&pairs).unwrap();
        let u: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let tau = kendall_tau(&u, &v);
        let family = CopulaFamily::new(FamilyTag::Gaussian, Rotation::R0).unwrap();
        let starts = [
            (family, (PI * tau / 2.0).sin()),
            (CopulaFamily::new(FamilyTag::Clayton, Rotation::R0).unwrap(), 2.0 * tau / (1.0 - tau)),
            (CopulaFamily::new(FamilyTag::Gumbel, Rotation::R0).unwrap(), 1.0 / (1.0 - tau)),
            (CopulaFamily::new(FamilyTag::Frank, Rotation::R0).unwrap(), frank_from_tau(tau)),
        ];
        for (fam, theta0) in starts {
            let start = BivariateCopula::new(fam, &[theta0]).unwrap();
            let (_, ll) = fit_mle(fam, &pairs).unwrap();
            assert!(ll >= sample.log_likelihood(&start) - 1e-9, "{fam:?} on source {k}");
        }
    }
}

#[test]
fn aic_selection_is_consistent() {
    let catalog = CopulaFamily::default_catalog();
    let gauss = BivariateCopula::gaussian(0.8).unwrap();
    let mut hits = 0;
    for s in 0..100 {
        let pairs = gauss.sample_pair(&mut RandomStream::new(1000 + s), 2000);
        if select_family(&pairs, &catalog).unwrap().family().tag() == FamilyTag::Gaussian {
            hits += 1;
        }
    }
    assert!(hits >= 90, "Gaussian selected {hits} of 100 times");

    // each of the seven alternatives gets its own shot at beating the AIC
    // penalty, so independence wins about 70% of the time, never a majority
    // of any single rival
    let ind = BivariateCopula::independence();
    let mut hits = 0;
    let mut rivals = std::collections::HashMap::new();
    for s in 0..200 {
        let pairs = ind.sample_pair(&mut RandomStream::new(2000 + s), 500);
        let c = select_family(&pairs, &catalog).unwrap();
        if c.is_independence() {
            hits += 1;
        } else {
            *rivals.entry(c.family().label()).or_insert(0) += 1;
        }
    }
    assert!(hits >= 120, "Independence selected {hits} of 200 times");
    assert!(rivals.values().all(|&r| r < 40), "{rivals:?}");
}

fn any_copula() -> impl Strategy<Value = BivariateCopula> {
    prop_oneof![
        (-0.95f64..0.95).prop_map(|r| BivariateCopula::gaussian(r).unwrap()),
        (-0.9f64..0.9, 2.5f64..30.0).prop_map(|(r, nu)| BivariateCopula::student_t(r, nu).unwrap()),
        (0.05f64..8.0, 0usize..4).prop_map(|(t, k)| BivariateCopula::clayton(t, ROT[k]).unwrap()),
        (1.0f64..6.0, 0usize..4).prop_map(|(t, k)| BivariateCopula::gumbel(t, ROT[k]).unwrap()),
        (0.1f64..20.0, any::<bool>())
            .prop_map(|(t, neg)| BivariateCopula::frank(if neg { -t } else { t }).unwrap()),
    ]
}

const ROT: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

proptest! {
    #[test]
    fn round_trip_and_monotonicity(c in any_copula(), w in 0.001f64..0.999, v in 0.001f64..0.999, du in 0.0f64..0.5) {
        let u = c.h_inverse(w, v).unwrap();
        prop_assert!((c.h_function(u, v).unwrap() - w).abs() <= 1e-8);
        let a = 0.25 * (1.0 - du);
        let b = a + du;
        prop_assert!(c.h_function(a, v).unwrap() <= c.h_function(b, v).unwrap() + 1e-15);
        prop_assert!(c.density(w, v).unwrap() > 0.0);
    }

    #[test]
    fn swap_exchanges_arguments(c in any_copula(), u in 0.01f64..0.99, v in 0.01f64..0.99) {
        let s = c.swapped();
        let d1 = c.density(u, v).unwrap();
        let d2 = s.density(v, u).unwrap();
        prop_assert!((d1 - d2).abs() <= 1e-10 * d1.max(1.0));
        prop_assert!((c.h2(u, v) - s.h1(v, u)).abs() <= 1e-12);
    }
}
