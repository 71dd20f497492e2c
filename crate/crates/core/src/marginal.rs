//! Empirical marginals and log-return preprocessing.
//!
//! `cdf` is the mid-rank empirical distribution scaled by `T + 1`, so every
//! value lands strictly inside the unit interval. `quantile` interpolates
//! linearly between the knots `(i / (T + 1), x_(i))` and is flat beyond the
//! end knots.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked and inherent f64 methods win
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalRepr", into = "MarginalRepr")]
pub struct EmpiricalMarginal {
    sorted: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MarginalRepr {
    knots: Vec<f64>,
}

impl TryFrom<MarginalRepr> for EmpiricalMarginal {
    type Error = Error;

    fn try_from(r: MarginalRepr) -> Result<Self> {
        if r.knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::domain("marginal knots must be finite and nondecreasing"));
        }
        Self::fit(&r.knots)
    }
}

impl From<EmpiricalMarginal> for MarginalRepr {
    fn from(m: EmpiricalMarginal) -> Self {
        MarginalRepr { knots: m.sorted }
    }
}

/// Fit the empirical marginal of `sample` (at least two finite values).
pub fn fit_empirical(sample: &[f64]) -> Result<EmpiricalMarginal> {
    EmpiricalMarginal::fit(sample)
}

impl EmpiricalMarginal {
    pub fn fit(sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::domain(format!(
                "empirical marginal needs at least 2 values, got {}",
                sample.len()
            )));
        }
        if let Some(bad) = sample.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain(format!("non-finite sample value {bad}")));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// True when every value is equal.
    pub fn is_degenerate(&self) -> bool {
        self.min() == self.max()
    }

    /// Mid-rank over `T + 1`: `(#{< x} + #{<= x} + 1) / (2 (T + 1))`.
    pub fn cdf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&s| s < x);
        let at_or_below = self.sorted.partition_point(|&s| s <= x);
        (below + at_or_below + 1) as f64 / (2.0 * (self.sorted.len() as f64 + 1.0))
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// `quantile` without the range check; `u` outside `(0, 1)` is clamped to
    /// the end knots.
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let pos = u * (n as f64 + 1.0);
        let nearest = pos.round();
        // snap onto a knot so that quantile(cdf(x)) == x exactly
        let pos = if (pos - nearest).abs() <= 1e-9 { nearest } else { pos };
        if pos <= 1.0 {
            return self.sorted[0];
        }
        if pos >= n as f64 {
            return self.sorted[n - 1];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let lo = self.sorted[i - 1];
        if frac == 0.0 {
            return lo;
        }
        let hi = self.sorted[i];
        lo + frac * (hi - lo)
    }

    /// `cdf` applied to every element of `sample`.
    pub fn pseudo_observations(&self, sample: &[f64]) -> Vec<f64> {
        sample.iter().map(|&x| self.cdf(x)).collect()
    }
}

/// Percentage log-returns `100 (ln s_{t+1} - ln s_t)`.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::domain("log-returns need at least 2 prices"));
    }
    if let Some((i, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::domain(format!(
            "log-returns need positive finite prices, got {p} at position {i}"
        )));
    }
    Ok(prices.windows(2).map(|w| 100.0 * (w[1].ln() - w[0].ln())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn small_sample_examples() {
        let m = fit_empirical(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.cdf(2.0), 0.5);
        assert_eq!(m.cdf(0.0), 0.125);
        assert_eq!(m.cdf(10.0), 0.875);
        assert_eq!(m.quantile(0.5).unwrap(), 2.0);
        for x in [1.0, 2.0, 3.0] {
            assert_eq!(m.quantile(m.cdf(x)).unwrap(), x);
        }
        assert!(m.quantile(0.0).is_err());
        assert!(m.quantile(1.0).is_err());
        assert!(fit_empirical(&[1.0]).is_err());
    }

    #[test]
    fn ties_take_mid_ranks() {
        let m = fit_empirical(&[1.0, 2.0, 2.0, 4.0]).unwrap();
        // ranks 2 and 3 share 2.5
        assert_eq!(m.cdf(2.0), 2.5 / 5.0);
        assert_eq!(m.quantile(m.cdf(2.0)).unwrap(), 2.0);
    }

    #[test]
    fn interpolates_between_knots() {
        let m = fit_empirical(&[0.0, 10.0]).unwrap();
        // knots at 1/3 -> 0 and 2/3 -> 10
        assert!((m.quantile(0.5).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(m.quantile(0.1).unwrap(), 0.0);
        assert_eq!(m.quantile(0.9).unwrap(), 10.0);
    }

    #[test]
    fn log_return_examples() {
        assert!((log_returns(&[1.0, core::f64::consts::E]).unwrap()[0] - 100.0).abs() < 1e-12);
        assert_eq!(log_returns(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        let r = log_returns(&[100.0, 101.0]).unwrap()[0];
        assert!((r - 100.0 * 1.01f64.ln()).abs() < 1e-12 && (r - 0.995).abs() < 1e-3);
        assert!(log_returns(&[1.0, 0.0]).is_err());
        assert!(log_returns(&[1.0]).is_err());
    }

    #[test]
    fn serde_round_trip_rejects_unsorted_knots() {
        let r = MarginalRepr { knots: vec![2.0, 1.0] };
        assert!(EmpiricalMarginal::try_from(r).is_err());
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_interior(sample in proptest::collection::vec(-100.0f64..100.0, 2..80),
                                     a in -150.0f64..150.0, b in -150.0f64..150.0) {
            let m = fit_empirical(&sample).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.cdf(lo) <= m.cdf(hi));
            prop_assert!(m.cdf(lo) > 0.0 && m.cdf(hi) < 1.0);
        }

        #[test]
        fn quantile_round_trip_on_knots(sample in proptest::collection::vec(-100.0f64..100.0, 2..80)) {
            let m = fit_empirical(&sample).unwrap();
            for &x in &sample {
                prop_assert_eq!(m.quantile(m.cdf(x)).unwrap(), x);
            }
        }

        #[test]
        fn quantile_monotone(sample in proptest::collection::vec(-100.0f64..100.0, 2..80),
                             a in 0.001f64..0.999, b in 0.001f64..0.999) {
            let m = fit_empirical(&sample).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.quantile(lo).unwrap() <= m.quantile(hi).unwrap());
        }
    }
}
