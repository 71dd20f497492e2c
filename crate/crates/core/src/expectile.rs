//! Asymmetric quadratic loss and expectiles.
//!
//! The tau-expectile of a sample is the unique minimizer of the mean
//! asymmetric quadratic loss `R_tau(x - m) = tau (x - m)_+^2 + (1 - tau) (x - m)_-^2`.
//! Its derivative in `m` is the score `psi_tau(x, m)`, and the empirical
//! expectile is the root of the averaged score, which is continuous,
//! strictly increasing and piecewise linear in `m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_pdf};

/// Expectile level `tau` in the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExpectileLevel(f64);

impl ExpectileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(Error::domain(alloc::format!(
                "expectile level must lie in (0, 1), got {tau}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ExpectileLevel {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        Self::new(tau)
    }
}

impl From<ExpectileLevel> for f64 {
    fn from(t: ExpectileLevel) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectileSolveSettings {
    /// Absolute tolerance on the averaged score.
    pub abs_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ExpectileSolveSettings {
    fn default() -> Self {
        Self {
            abs_tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

impl ExpectileSolveSettings {
    pub fn new(abs_tolerance: f64, max_iterations: usize) -> Result<Self> {
        if !(abs_tolerance > 0.0) || max_iterations == 0 {
            return Err(Error::domain(
                "solver settings need abs_tolerance > 0 and max_iterations >= 1",
            ));
        }
        Ok(Self {
            abs_tolerance,
            max_iterations,
        })
    }
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("{what} must be finite, got {v}")))
    }
}

/// `R_tau(residual)`.
pub fn asymmetric_loss(tau: ExpectileLevel, residual: f64) -> Result<f64> {
    check_finite(residual, "residual")?;
    Ok(loss_unchecked(tau.0, residual))
}

#[inline]
fn loss_unchecked(tau: f64, r: f64) -> f64 {
    if r >= 0.0 {
        tau * r * r
    } else {
        (1.0 - tau) * r * r
    }
}

/// Derivative of `m -> R_tau(x - m)`.
pub fn loss_derivative(tau: ExpectileLevel, x: f64, m: f64) -> Result<f64> {
    check_finite(x, "x")?;
    check_finite(m, "m")?;
    Ok(psi(tau.0, x, m))
}

#[inline]
fn psi(tau: f64, x: f64, m: f64) -> f64 {
    if m <= x {
        2.0 * tau * (m - x)
    } else {
        2.0 * (1.0 - tau) * (m - x)
    }
}

/// Averaged score `z_{tau,N}(m) = (1/N) sum psi_tau(x_i, m)`.
pub fn score(sample: &[f64], tau: ExpectileLevel, m: f64) -> f64 {
    let t = tau.0;
    sample.iter().map(|&x| psi(t, x, m)).sum::<f64>() / sample.len() as f64
}

/// Empirical tau-expectile: root of the averaged score.
///
/// Safeguarded Newton on `[min, max]` of the sample. A Newton step on the
/// piecewise-linear score is the weighted mean `sum w_i x_i / sum w_i` with
/// `w_i = tau` above `m` and `1 - tau` below, so iterates settle once the
/// active set stops changing. Steps leaving the bracket fall back to bisection.
pub fn empirical_expectile(
    sample: &[f64],
    tau: ExpectileLevel,
    settings: &ExpectileSolveSettings,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::domain("empirical expectile of an empty sample"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &x in sample {
        check_finite(x, "sample value")?;
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
    }
    if lo == hi {
        return Ok(lo);
    }
    let t = tau.0;
    let n = sample.len() as f64;
    let mut m = (sum / n).clamp(lo, hi);
    let mut last_z = f64::NAN;
    for _ in 0..settings.max_iterations {
        let mut wsum = 0.0;
        let mut wxsum = 0.0;
        for &x in sample {
            let w = if m <= x { t } else { 1.0 - t };
            wsum += w;
            wxsum += w * x;
        }
        // z(m) = (2/N) (m * wsum - wxsum)
        let z = 2.0 * (m * wsum - wxsum) / n;
        last_z = z;
        if z.abs() <= settings.abs_tolerance {
            return Ok(m);
        }
        if z < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        let newton = wxsum / wsum;
        m = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            let z_mid = score(sample, tau, m);
            if z_mid.abs() <= settings.abs_tolerance {
                return Ok(m);
            }
            last_z = z_mid;
            break;
        }
    }
    Err(Error::Numeric {
        message: alloc::format!(
            "empirical expectile did not converge (last score {last_z:e})"
        ),
        bracket: Some((lo, hi)),
    })
}

/// Expectile of `N(mean, stdev^2)`: `mean + stdev * k_tau`, with `k_tau`
/// the root of `tau E(U - m)_+ = (1 - tau) E(m - U)_+` for standard normal
/// `U`, from the closed-form partial moment `E(U - m)_+ = phi(m) - m (1 - Phi(m))`.
pub fn normal_expectile(tau: ExpectileLevel, mean: f64, stdev: f64) -> Result<f64> {
    check_finite(mean, "mean")?;
    check_finite(stdev, "stdev")?;
    if stdev < 0.0 {
        return Err(Error::domain("stdev must be nonnegative"));
    }
    Ok(mean + stdev * standard_normal_expectile(tau))
}

fn standard_normal_expectile(tau: ExpectileLevel) -> f64 {
    let t = tau.0;
    if t == 0.5 {
        return 0.0;
    }
    // f(m) = (1 - tau) E(m - U)_+ - tau E(U - m)_+, increasing in m.
    let f = |m: f64| {
        let upper = norm_pdf(m) - m * (1.0 - norm_cdf(m));
        let lower = upper + m;
        (1.0 - t) * lower - t * upper
    };
    let (mut lo, mut hi) = (-40.0, 40.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean asymmetric loss over `(observation, predicted expectile)` pairs.
pub fn mean_expectile_loss(pairs: &[(f64, f64)], tau: ExpectileLevel) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::domain("mean expectile loss of an empty list"));
    }
    let mut total = 0.0;
    for &(obs, pred) in pairs {
        check_finite(obs, "observation")?;
        check_finite(pred, "prediction")?;
        total += loss_unchecked(tau.0, obs - pred);
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn lvl(t: f64) -> ExpectileLevel {
        ExpectileLevel::new(t).unwrap()
    }

    #[test]
    fn level_rejects_boundaries() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(ExpectileLevel::new(bad).is_err());
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(asymmetric_loss(lvl(0.75), 2.0).unwrap(), 3.0);
        assert_eq!(asymmetric_loss(lvl(0.3), 0.0).unwrap(), 0.0);
        assert_eq!(asymmetric_loss(lvl(0.5), -2.0).unwrap(), 2.0);
        assert!(asymmetric_loss(lvl(0.5), f64::INFINITY).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert!((loss_derivative(lvl(0.9), 1.0, 0.0).unwrap() + 1.8).abs() < 1e-15);
        assert!((loss_derivative(lvl(0.9), 0.0, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(loss_derivative(lvl(0.3), 2.5, 2.5).unwrap(), 0.0);
        assert!(loss_derivative(lvl(0.3), f64::NAN, 0.0).is_err());
    }

    #[test]
    fn two_point_expectiles() {
        let s = ExpectileSolveSettings::default();
        assert!((empirical_expectile(&[0.0, 1.0], lvl(0.5), &s).unwrap() - 0.5).abs() < 1e-12);
        // (1 - tau) m + tau (m - 1) = 0 gives m = tau
        assert!((empirical_expectile(&[0.0, 1.0], lvl(0.9), &s).unwrap() - 0.9).abs() < 1e-10);
    }

    #[test]
    fn degenerate_and_empty_samples() {
        let s = ExpectileSolveSettings::default();
        assert_eq!(empirical_expectile(&[2.0, 2.0, 2.0], lvl(0.1), &s).unwrap(), 2.0);
        assert!(empirical_expectile(&[], lvl(0.1), &s).is_err());
    }

    #[test]
    fn non_convergence_reports_bracket() {
        let s = ExpectileSolveSettings::new(1e-300, 1).unwrap();
        let sample = [0.0, 1.0, 5.0, -3.0, 2.2];
        match empirical_expectile(&sample, lvl(0.8), &s) {
            Err(Error::Numeric { bracket: Some((lo, hi)), .. }) => assert!(lo <= hi),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn normal_expectile_examples() {
        assert_eq!(normal_expectile(lvl(0.5), 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(normal_expectile(lvl(0.5), 3.2, 7.0).unwrap(), 3.2);
        let k = normal_expectile(lvl(0.9), 0.0, 1.0).unwrap();
        // residual check of the defining partial-moment equation
        let upper = norm_pdf(k) - k * (1.0 - norm_cdf(k));
        assert!((0.9 * upper - 0.1 * (upper + k)).abs() < 1e-12);
        let k1 = normal_expectile(lvl(0.1), 0.0, 1.0).unwrap();
        assert!((k + k1).abs() < 1e-12);
        assert!(normal_expectile(lvl(0.5), 0.0, -1.0).is_err());
    }

    #[test]
    fn mean_loss_examples() {
        assert_eq!(mean_expectile_loss(&[(1.0, 1.0), (2.0, 2.0)], lvl(0.3)).unwrap(), 0.0);
        assert_eq!(mean_expectile_loss(&[(1.0, 0.0)], lvl(0.75)).unwrap(), 0.75);
        assert_eq!(mean_expectile_loss(&[(0.0, 1.0), (2.0, 1.0)], lvl(0.5)).unwrap(), 0.5);
        assert!(mean_expectile_loss(&[], lvl(0.5)).is_err());
    }

    fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1e3f64..1e3, 1..60)
    }

    proptest! {
        #[test]
        fn root_range_and_score(sample in sample_strategy(), t in 0.01f64..0.99) {
            let s = ExpectileSolveSettings::default();
            let tau = lvl(t);
            let m = empirical_expectile(&sample, tau, &s).unwrap();
            let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo && m <= hi);
            if lo < hi {
                prop_assert!(score(&sample, tau, m).abs() <= s.abs_tolerance);
            }
        }

        #[test]
        fn equivariance(sample in sample_strategy(), t in 0.01f64..0.99, c in 0.1f64..10.0, a in -50.0f64..50.0) {
            let s = ExpectileSolveSettings::default();
            let tau = lvl(t);
            let base = empirical_expectile(&sample, tau, &s).unwrap();
            let scaled: Vec<f64> = sample.iter().map(|x| c * x).collect();
            let shifted: Vec<f64> = sample.iter().map(|x| x + a).collect();
            let tol = 10.0 * s.abs_tolerance;
            let scaled_hit = empirical_expectile(&scaled, tau, &s).unwrap();
            let shifted_hit = empirical_expectile(&shifted, tau, &s).unwrap();
            prop_assert!((scaled_hit - c * base).abs() <= tol + 1e-12 * (c * base).abs());
            prop_assert!((shifted_hit - base - a).abs() <= tol + 1e-12 * (base.abs() + a.abs()));
        }

        #[test]
        fn monotone_in_level(sample in sample_strategy(), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
            let s = ExpectileSolveSettings::default();
            let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let ea = empirical_expectile(&sample, lvl(a), &s).unwrap();
            let eb = empirical_expectile(&sample, lvl(b), &s).unwrap();
            prop_assert!(ea <= eb + 1e-9);
        }

        #[test]
        fn half_level_is_mean(sample in sample_strategy()) {
            let s = ExpectileSolveSettings::default();
            let m = empirical_expectile(&sample, lvl(0.5), &s).unwrap();
            let mean = sample.iter().sum::<f64>() / sample.len() as f64;
            prop_assert!((m - mean).abs() <= 10.0 * s.abs_tolerance + 1e-12 * mean.abs());
        }

        #[test]
        fn score_is_two_lipschitz(sample in sample_strategy(), t in 0.01f64..0.99, m1 in -2e3f64..2e3, m2 in -2e3f64..2e3) {
            let tau = lvl(t);
            let d = (score(&sample, tau, m1) - score(&sample, tau, m2)).abs();
            prop_assert!(d <= 2.0 * (m1 - m2).abs() * (1.0 + 1e-12) + 1e-9);
        }
    }
}
