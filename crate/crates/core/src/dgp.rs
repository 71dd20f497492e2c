//! Simulation designs and the Monte-Carlo size/power harness.
//!
//! Every design has the form
//!
//! ```text
//! X_t = c + a_x X_{t-1} + b_y Y_{t-1} + b_z Z_{t-1} + g Y_{t-1} Z_{t-1} + e_{x,t}
//! Y_t = c + a_y Y_{t-1} + e_{y,t}
//! Z_t = c + a_z Z_{t-1} + e_{z,t}
//! ```
//!
//! with either Gaussian white noise or GARCH(1,1) errors driven by
//! standardized skewed Student-t innovations.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
#[allow(unused_imports)] // unused when std is linked and inherent f64 methods win
use num_traits::Float;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::expectile::{empirical_expectile, ExpectileLevel, ExpectileSolveSettings};
use crate::gc::{linear_f_test, pairwise_panel, run_joint_tests, TestConfig};
use crate::math::{ln_gamma, norm_cdf};
use crate::mvine::SeriesPanel;
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpTag {
    S1,
    S2,
    P1,
    P2,
    P3,
    P4,
}

impl DgpTag {
    pub const ALL: [DgpTag; 6] = [DgpTag::S1, DgpTag::S2, DgpTag::P1, DgpTag::P2, DgpTag::P3, DgpTag::P4];

    pub fn as_str(self) -> &'static str {
        match self {
            DgpTag::S1 => "S1",
            DgpTag::S2 => "S2",
            DgpTag::P1 => "P1",
            DgpTag::P2 => "P2",
            DgpTag::P3 => "P3",
            DgpTag::P4 => "P4",
        }
    }

    /// True for the designs without causality from `(Y, Z)` to `X`.
    pub fn is_null(self) -> bool {
        matches!(self, DgpTag::S1 | DgpTag::S2)
    }
}

impl fmt::Display for DgpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DgpTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown design '{s}', expected one of S1, S2, P1, P2, P3, P4")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Garch {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Garch {
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Innovations {
    Gaussian,
    /// GARCH(1,1) errors with standardized skewed Student-t shocks.
    GarchSkewT { garch: Garch, nu: f64, xi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub tag: DgpTag,
    pub intercept: f64,
    pub ar_x: f64,
    pub ar_y: f64,
    pub ar_z: f64,
    pub lag_y: f64,
    pub lag_z: f64,
    pub interaction: f64,
    pub innovations: Innovations,
    pub burn_in: usize,
}

pub const DEFAULT_BURN_IN: usize = 500;

pub const GARCH: Garch = Garch {
    omega: 0.01,
    alpha: 0.08,
    beta: 0.87,
};

pub const SKEW_T_NU: f64 = 5.0;
pub const SKEW_T_XI: f64 = -1.5;

impl DgpSpec {
    pub fn new(tag: DgpTag) -> Self {
        let skew = Innovations::GarchSkewT {
            garch: GARCH,
            nu: SKEW_T_NU,
            xi: SKEW_T_XI,
        };
        let base = DgpSpec {
            tag,
            intercept: 0.0,
            ar_x: 0.0,
            ar_y: 0.0,
            ar_z: 0.0,
            lag_y: 0.0,
            lag_z: 0.0,
            interaction: 0.0,
            innovations: Innovations::Gaussian,
            burn_in: DEFAULT_BURN_IN,
        };
        match tag {
            DgpTag::S1 => DgpSpec {
                ar_x: 0.5,
                ar_y: 0.5,
                ar_z: 0.5,
                ..base
            },
            DgpTag::S2 => DgpSpec {
                intercept: 0.05,
                innovations: skew,
                ..base
            },
            DgpTag::P1 => DgpSpec {
                ar_x: 0.5,
                ar_y: 0.5,
                ar_z: 0.5,
                lag_y: 0.2,
                lag_z: 0.2,
                ..base
            },
            DgpTag::P2 => DgpSpec {
                ar_x: 0.5,
                ar_y: 0.25,
                ar_z: 0.25,
                interaction: 5.0,
                ..base
            },
            DgpTag::P3 => DgpSpec {
                ar_x: 0.5,
                interaction: 5.0,
                ..base
            },
            DgpTag::P4 => DgpSpec {
                ar_x: 0.5,
                interaction: 2.5,
                innovations: skew,
                ..base
            },
        }
    }

    pub fn with_burn_in(self, burn_in: usize) -> Self {
        Self { burn_in, ..self }
    }
}

// Mean and standard deviation of the Fernandez-Steel skewed unit-variance t
// with skewing parameter xi > 0.
fn skew_t_moments(nu: f64, xi: f64) -> (f64, f64) {
    let m1 = 2.0 * (nu - 2.0).sqrt() * (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu)).exp()
        / (core::f64::consts::PI.sqrt() * (nu - 1.0));
    let mu = m1 * (xi - 1.0 / xi);
    let var = (1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0;
    (mu, var.sqrt())
}

/// Standardized skewed Student-t sampler.
///
/// A unit-variance Student-t magnitude is scaled by `xi` on the positive side
/// and by `1 / xi` on the negative side, the positive side being chosen with
/// probability `xi^2 / (1 + xi^2)`; the result is centred and scaled to
/// mean 0, variance 1. A negative `xi` returns the mirror image of the draw
/// for `|xi|`, so `xi < 0` gives negative skewness.
#[derive(Debug, Clone, Copy)]
pub struct SkewedT {
    nu: f64,
    xi: f64,
    mirror: bool,
    t_scale: f64,
    mean: f64,
    sd: f64,
    t: StudentT<f64>,
}

impl SkewedT {
    pub fn new(nu: f64, xi: f64) -> Result<Self> {
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(Error::domain(format!("skewed t needs nu > 2, got {nu}")));
        }
        if !(xi.is_finite() && xi != 0.0) {
            return Err(Error::domain(format!("skewed t needs a finite nonzero xi, got {xi}")));
        }
        let a = xi.abs();
        let (mean, sd) = skew_t_moments(nu, a);
        Ok(Self {
            nu,
            xi: a,
            mirror: xi < 0.0,
            t_scale: ((nu - 2.0) / nu).sqrt(),
            mean,
            sd,
            t: StudentT::new(nu).map_err(|_| Error::domain("invalid t degrees of freedom"))?,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn draw(&self, rng: &mut RandomStream) -> f64 {
        let w = self.xi / (self.xi + 1.0 / self.xi);
        let side = rng.uniform() < w;
        let mag = (self.t.sample(rng) * self.t_scale).abs();
        let x = if side { mag * self.xi } else { -mag / self.xi };
        let z = (x - self.mean) / self.sd;
        if self.mirror {
            -z
        } else {
            z
        }
    }
}

pub fn skewed_t_sample(nu: f64, xi: f64, rng: &mut RandomStream, n: usize) -> Result<Vec<f64>> {
    let d = SkewedT::new(nu, xi)?;
    Ok((0..n).map(|_| d.draw(rng)).collect())
}

struct ErrorProcess {
    innovations: Innovations,
    skew: Option<SkewedT>,
    sigma2: f64,
    eps_prev: f64,
    rng: RandomStream,
}

impl ErrorProcess {
    fn new(innovations: Innovations, rng: RandomStream) -> Result<Self> {
        let (skew, sigma2) = match innovations {
            Innovations::Gaussian => (None, 1.0),
            Innovations::GarchSkewT { garch, nu, xi } => {
                if !(garch.omega > 0.0 && garch.alpha >= 0.0 && garch.beta >= 0.0 && garch.alpha + garch.beta < 1.0) {
                    return Err(Error::domain("GARCH needs omega > 0, alpha, beta >= 0, alpha + beta < 1"));
                }
                (Some(SkewedT::new(nu, xi)?), garch.unconditional_variance())
            }
        };
        Ok(Self {
            innovations,
            skew,
            sigma2,
            eps_prev: sigma2.sqrt(),
            rng,
        })
    }

    fn next(&mut self) -> f64 {
        match (self.innovations, &self.skew) {
            (Innovations::GarchSkewT { garch, .. }, Some(d)) => {
                self.sigma2 = garch.omega + garch.alpha * self.eps_prev * self.eps_prev + garch.beta * self.sigma2;
                let e = self.sigma2.sqrt() * d.draw(&mut self.rng);
                self.eps_prev = e;
                e
            }
            _ => self.rng.standard_normal(),
        }
    }
}

/// Simulates `burn_in + T` steps from zero and returns the last `T` as
/// columns `x, y, z`. Each series' errors come from its own stream
/// `rng.derive("innovation", i)`.
pub fn simulate_dgp(spec: &DgpSpec, t_len: usize, rng: &RandomStream) -> Result<SeriesPanel> {
    if t_len < 20 {
        return Err(Error::domain(format!("simulated length must be at least 20, got {t_len}")));
    }
    let mut errs = (0..3)
        .map(|i| ErrorProcess::new(spec.innovations, rng.derive("innovation", i)))
        .collect::<Result<Vec<_>>>()?;
    let total = spec.burn_in + t_len;
    let mut cols = vec![Vec::with_capacity(t_len); 3];
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for step in 0..total {
        let ex = errs[0].next();
        let ey = errs[1].next();
        let ez = errs[2].next();
        let nx = spec.intercept + spec.ar_x * x + spec.lag_y * y + spec.lag_z * z + spec.interaction * y * z + ex;
        let ny = spec.intercept + spec.ar_y * y + ey;
        let nz = spec.intercept + spec.ar_z * z + ez;
        x = nx;
        y = ny;
        z = nz;
        if step >= spec.burn_in {
            cols[0].push(x);
            cols[1].push(y);
            cols[2].push(z);
        }
    }
    SeriesPanel::new(vec!["x".to_string(), "y".to_string(), "z".to_string()], cols)
}

/// Monte-Carlo checks of the P3 design's conditional moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P3Oracles {
    /// `E[(X_t - 0.5 X_{t-1})^2]`, 26 in population.
    pub mse_restricted: f64,
    /// `E[(X_t - 0.5 X_{t-1} - 5 Y_{t-1} Z_{t-1})^2]`, 1 in population.
    pub mse_unrestricted: f64,
    /// Moments and Kolmogorov distance to N(0, 1) of
    /// `(X_t - 0.5 X_{t-1}) / sqrt(25 Y_{t-1}^2 + 1)`.
    pub standardized_mean: f64,
    pub standardized_variance: f64,
    pub standardized_ks: f64,
    /// Empirical 1/2-expectile of `X_t - 0.5 X_{t-1}`, 0 in population.
    pub half_expectile_offset: f64,
}

pub fn p3_analytic_oracles(t_mc: usize, rng: &RandomStream) -> Result<P3Oracles> {
    if t_mc < 100_000 {
        return Err(Error::domain("P3 oracles need at least 100000 draws"));
    }
    let spec = DgpSpec::new(DgpTag::P3);
    let panel = simulate_dgp(&spec, t_mc + 1, rng)?;
    let (x, y, z) = (panel.column(0), panel.column(1), panel.column(2));
    let n = t_mc as f64;
    let mut sr = 0.0;
    let mut su = 0.0;
    let mut w = Vec::with_capacity(t_mc);
    let mut std = Vec::with_capacity(t_mc);
    for t in 1..=t_mc {
        let r = x[t] - spec.ar_x * x[t - 1];
        let u = r - spec.interaction * y[t - 1] * z[t - 1];
        sr += r * r;
        su += u * u;
        w.push(r);
        std.push(r / (spec.interaction * spec.interaction * y[t - 1] * y[t - 1] + 1.0).sqrt());
    }
    let mean = std.iter().sum::<f64>() / n;
    let var = std.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    std.sort_by(|a, b| a.total_cmp(b));
    let ks = std
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = norm_cdf(s);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let half = ExpectileLevel::new(0.5)?;
    Ok(P3Oracles {
        mse_restricted: sr / n,
        mse_unrestricted: su / n,
        standardized_mean: mean,
        standardized_variance: var,
        standardized_ks: ks,
        half_expectile_offset: empirical_expectile(&w, half, &ExpectileSolveSettings::default())?,
    })
}

/// Which tests a Monte-Carlo study runs on each panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSelection {
    pub joint: bool,
    pub pairwise: bool,
    pub f_test: bool,
}

impl Default for TestSelection {
    fn default() -> Self {
        Self {
            joint: true,
            pairwise: false,
            f_test: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Joint,
    /// Pairwise test from the named column.
    Pairwise(String),
    FTest,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::Joint => f.write_str("joint"),
            TestKind::Pairwise(c) => write!(f, "pairwise:{c}"),
            TestKind::FTest => f.write_str("ftest"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub dgp: DgpTag,
    /// `None` for the F-test, which has no expectile level.
    pub tau: Option<ExpectileLevel>,
    pub t_len: usize,
    pub test: TestKind,
    pub replications: usize,
    pub rejections: usize,
    pub failures: usize,
    /// `rejections / (replications - failures)`.
    pub rate: f64,
    /// False when more than 5% of the replications failed.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub cells: Vec<McCell>,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n_bootstrap: usize,
    pub n_predictions: usize,
    pub burn_in: usize,
}

impl McReport {
    pub fn cell(&self, dgp: DgpTag, tau: Option<f64>, t_len: usize, test: &TestKind) -> Option<&McCell> {
        self.cells.iter().find(|c| {
            c.dgp == dgp && c.t_len == t_len && &c.test == test && c.tau.map(|t| t.value()) == tau
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub dgps: Vec<DgpTag>,
    pub taus: Vec<ExpectileLevel>,
    pub lengths: Vec<usize>,
    pub replications: usize,
    pub alpha: f64,
    pub tests: TestSelection,
    pub burn_in: usize,
    /// Template for every test; its `seed` is the study's root seed.
    pub config: TestConfig,
}

// outcome of one replicate: per test kind, per level, Some(reject) or None on failure
type ReplicateOutcome = Vec<(TestKind, Option<ExpectileLevel>, Option<bool>)>;

fn run_replicate(
    spec: &DgpSpec,
    t_len: usize,
    s: usize,
    settings: &McSettings,
    root: &RandomStream,
) -> ReplicateOutcome {
    let cell_stream = root.derive(spec.tag.as_str(), t_len as u64).derive("replication", s as u64);
    let mut out = Vec::new();
    let panel = simulate_dgp(spec, t_len, &cell_stream.derive("panel", 0));
    let mut config = settings.config.clone();
    config.seed = cell_stream.derive("test", 0).key();
    let alpha = settings.alpha;
    let mut record = |kind: TestKind, res: Option<Vec<bool>>| match res {
        Some(rej) => {
            for (tau, r) in settings.taus.iter().zip(rej) {
                out.push((kind.clone(), Some(*tau), Some(r)));
            }
        }
        None => {
            for tau in &settings.taus {
                out.push((kind.clone(), Some(*tau), None));
            }
        }
    };
    let panel = match panel {
        Ok(p) => p,
        Err(_) => {
            if settings.tests.joint {
                record(TestKind::Joint, None);
            }
            return out;
        }
    };
    let seq = Sequential;
    if settings.tests.joint {
        let r = run_joint_tests(&panel, &settings.taus, &config, &seq)
            .ok()
            .map(|v| v.iter().map(|t| t.rejects(alpha)).collect());
        record(TestKind::Joint, r);
    }
    if settings.tests.pairwise {
        for name in panel.names()[1..].to_vec() {
            let r = pairwise_panel(&panel, &name)
                .and_then(|p| run_joint_tests(&p, &settings.taus, &config, &seq))
                .ok()
                .map(|v| v.iter().map(|t| t.rejects(alpha)).collect());
            record(TestKind::Pairwise(name), r);
        }
    }
    if settings.tests.f_test {
        let r = linear_f_test(&panel, 1).ok().map(|f| f.p_value < alpha);
        out.push((TestKind::FTest, None, r));
    }
    out
}

/// Rejection rates over the grid `dgps x lengths x taus`. Replicate `s` of
/// cell `(dgp, T)` draws its panel and test seed from streams derived from
/// `(seed, dgp, T, s)` only, so all levels share the same panels and the
/// report is independent of the executor's scheduling.
pub fn mc_study<E: Executor>(settings: &McSettings, exec: &E) -> Result<McReport> {
    if settings.replications < 1 {
        return Err(Error::domain("a Monte-Carlo study needs at least 1 replication"));
    }
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    if settings.dgps.is_empty() || settings.lengths.is_empty() {
        return Err(Error::domain("the study grid is empty"));
    }
    if (settings.tests.joint || settings.tests.pairwise) && settings.taus.is_empty() {
        return Err(Error::domain("copula tests need at least one expectile level"));
    }
    let root = RandomStream::new(settings.config.seed);
    let mut cells = Vec::new();
    for &tag in &settings.dgps {
        let spec = DgpSpec::new(tag).with_burn_in(settings.burn_in);
        for &t_len in &settings.lengths {
            let outcomes: Vec<ReplicateOutcome> =
                exec.map_indexed(settings.replications, |s| run_replicate(&spec, t_len, s, settings, &root));
            let mut keys: Vec<(TestKind, Option<ExpectileLevel>)> = Vec::new();
            for (k, tau, _) in outcomes.iter().flatten() {
                if !keys.iter().any(|(k2, t2)| k2 == k && t2 == tau) {
                    keys.push((k.clone(), *tau));
                }
            }
            for (kind, tau) in keys {
                let mut rejections = 0;
                let mut failures = 0;
                for (k, t, r) in outcomes.iter().flatten() {
                    if *k == kind && *t == tau {
                        match r {
                            Some(true) => rejections += 1,
                            Some(false) => {}
                            None => failures += 1,
                        }
                    }
                }
                let ok = settings.replications - failures;
                cells.push(McCell {
                    dgp: tag,
                    tau,
                    t_len,
                    test: kind,
                    replications: settings.replications,
                    rejections,
                    failures,
                    rate: if ok > 0 { rejections as f64 / ok as f64 } else { f64::NAN },
                    valid: ok > 0 && failures as f64 <= 0.05 * settings.replications as f64,
                });
            }
        }
    }
    Ok(McReport {
        cells,
        replications: settings.replications,
        alpha: settings.alpha,
        seed: settings.config.seed,
        n_bootstrap: settings.config.n_bootstrap,
        n_predictions: settings.config.n_predictions,
        burn_in: settings.burn_in,
    })
}
