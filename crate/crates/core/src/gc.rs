//! Expectile Granger-causality statistic, copula bootstrap and the linear
//! F-test baseline.
//!
//! The statistic compares two one-step predictors of `X_t`: the restricted
//! model knows only `X`'s own past, the unrestricted model also sees the
//! lagged `Z` columns. For each evaluation time both models draw `N` values
//! of `X_t` given the previous row, the empirical `tau`-expectile of the draws
//! is the prediction, and the statistic is the log-ratio of the two mean
//! asymmetric losses. By default the two models draw independent samples;
//! [`DrawScheme::Common`] pairs them on shared uniforms instead.
//!
//! The p-value comes from refitting everything on `B` panels simulated from
//! the unrestricted model with the lagged `Z -> X` channel removed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked and inherent f64 methods win
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bicop::{CopulaFamily, SelectionCriterion};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::expectile::{empirical_expectile, ExpectileLevel, ExpectileSolveSettings};
use crate::math::f_sf;
use crate::mvine::{fit_marginals, FitScope, FitSettings, MVineModel, SeriesPanel};
use crate::rng::RandomStream;
use crate::stats::least_squares;

/// How the bootstrap count becomes a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueRule {
    /// `#{null >= observed} / B`.
    #[default]
    Plain,
    /// `(1 + #{null >= observed}) / (1 + B)`.
    PlusOne,
}

/// How the predictive draws of the two models relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawScheme {
    /// Separate i.i.d. samples per model.
    #[default]
    Independent,
    /// Both models invert the same uniforms, so identical models give a
    /// statistic of exactly 0.
    Common,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub tau: ExpectileLevel,
    /// Draws per prediction (`N`).
    pub n_predictions: usize,
    /// First evaluated time `T0` (1-based); `None` means `ceil(T / 2)`.
    pub eval_start: Option<usize>,
    /// Bootstrap replicates (`B`).
    pub n_bootstrap: usize,
    pub seed: u64,
    pub catalog: Vec<CopulaFamily>,
    pub criterion: SelectionCriterion,
    pub truncation: Option<usize>,
    pub scope: FitScope,
    pub p_value_rule: PValueRule,
    pub draws: DrawScheme,
    /// Refit the marginals on every null panel. When false, the marginals of
    /// the observed panel are kept and only the copulas are refitted.
    pub refit_marginals: bool,
    /// Largest tolerated fraction of failed bootstrap replicates.
    pub failure_cap: f64,
    pub solver: ExpectileSolveSettings,
}

impl TestConfig {
    pub fn new(tau: ExpectileLevel) -> Self {
        Self {
            tau,
            n_predictions: 200,
            eval_start: None,
            n_bootstrap: 200,
            seed: 0,
            catalog: CopulaFamily::default_catalog(),
            criterion: SelectionCriterion::Aic,
            truncation: None,
            scope: FitScope::Predictive,
            p_value_rule: PValueRule::Plain,
            draws: DrawScheme::Independent,
            refit_marginals: true,
            failure_cap: 0.05,
            solver: ExpectileSolveSettings::default(),
        }
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            catalog: self.catalog.clone(),
            criterion: self.criterion,
            truncation: self.truncation,
            scope: self.scope,
            markov_order: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_predictions < 2 {
            return Err(Error::domain("at least 2 draws per prediction are needed"));
        }
        if self.n_bootstrap < 1 {
            return Err(Error::domain("at least 1 bootstrap replicate is needed"));
        }
        if self.catalog.is_empty() {
            return Err(Error::domain("copula catalog is empty"));
        }
        if !(0.0..1.0).contains(&self.failure_cap) {
            return Err(Error::domain("failure cap must lie in [0, 1)"));
        }
        Ok(())
    }

    /// `T0` for a panel of `t_len` rows.
    pub fn resolve_eval_start(&self, t_len: usize) -> Result<usize> {
        let t0 = self.eval_start.unwrap_or(t_len.div_ceil(2));
        if t0 < 2 || t0 > t_len {
            return Err(Error::domain(format!(
                "evaluation start must lie in 2..={t_len}, got {t0}"
            )));
        }
        Ok(t0)
    }
}

/// Mean losses and statistic for one expectile level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticParts {
    pub tau: ExpectileLevel,
    pub statistic: f64,
    pub restricted_loss: f64,
    pub unrestricted_loss: f64,
}

/// Part A output: the statistic per level plus the fitted models.
#[derive(Debug, Clone)]
pub struct GcStatistic {
    pub parts: Vec<StatisticParts>,
    pub restricted: MVineModel,
    pub unrestricted: MVineModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcTestResult {
    pub tau: ExpectileLevel,
    pub statistic: f64,
    pub null_statistics: Vec<f64>,
    pub p_value: f64,
    pub restricted_loss: f64,
    pub unrestricted_loss: f64,
    /// Replicates that failed and were left out of the p-value.
    pub failed_replicates: usize,
}

impl GcTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Per-time predictive draws of both models.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDraws {
    /// 0-based rows that were predicted.
    pub rows: Vec<usize>,
    pub observed: Vec<f64>,
    pub restricted: Vec<Vec<f64>>,
    pub unrestricted: Vec<Vec<f64>>,
}

/// The restricted model for `X` alone, read off a model fitted on the full
/// panel. Its single edge is fitted on the same `(X_{t-1}, X_t)` pairs as the
/// unrestricted tree-1 edge, so refitting would reproduce it exactly.
pub fn restricted_model(unrestricted: &MVineModel) -> Result<MVineModel> {
    MVineModel::from_parts(
        vec![unrestricted.names()[0].clone()],
        vec![unrestricted.marginals()[0].clone()],
        Vec::new(),
        vec![vec![*unrestricted.temporal_copula()]],
    )
}

/// Draws `N` predictive values per evaluation row `r` from both models.
/// Independent draws use `stream.derive("restricted", r)` and
/// `stream.derive("unrestricted", r)`; common draws share
/// `stream.derive("predict", r)`.
pub fn predictive_draws(
    restricted: &MVineModel,
    unrestricted: &MVineModel,
    panel: &SeriesPanel,
    n_predictions: usize,
    eval_start: usize,
    scheme: DrawScheme,
    stream: &RandomStream,
) -> Result<PredictionDraws> {
    let t_len = panel.n_rows();
    let x_marg = &unrestricted.marginals()[0];
    let xr_marg = &restricted.marginals()[0];
    let rows: Vec<usize> = (eval_start - 1..t_len).collect();
    let mut observed = Vec::with_capacity(rows.len());
    let mut rd = Vec::with_capacity(rows.len());
    let mut ud = Vec::with_capacity(rows.len());
    let uniforms = |label: &str, r: usize| -> Vec<f64> {
        let mut s = stream.derive(label, r as u64);
        (0..n_predictions).map(|_| s.uniform()).collect()
    };
    for &r in &rows {
        let prev = panel.row(r - 1);
        let in_u = unrestricted.predictive_inputs(&prev)?;
        let in_r = restricted.predictive_inputs(&prev[..1])?;
        let (wr, wu) = match scheme {
            DrawScheme::Independent => (uniforms("restricted", r), uniforms("unrestricted", r)),
            DrawScheme::Common => {
                let w = uniforms("predict", r);
                (w.clone(), w)
            }
        };
        rd.push(
            wr.iter()
                .map(|&p| xr_marg.quantile_unchecked(restricted.invert_predictive(&in_r, p)))
                .collect(),
        );
        ud.push(
            wu.iter()
                .map(|&p| x_marg.quantile_unchecked(unrestricted.invert_predictive(&in_u, p)))
                .collect(),
        );
        observed.push(panel.column(0)[r]);
    }
    Ok(PredictionDraws {
        rows,
        observed,
        restricted: rd,
        unrestricted: ud,
    })
}

fn asym(tau: f64, r: f64) -> f64 {
    if r >= 0.0 {
        tau * r * r
    } else {
        (1.0 - tau) * r * r
    }
}

/// Mean losses and log-ratio at `tau` from precomputed draws.
pub fn statistic_from_draws(
    draws: &PredictionDraws,
    tau: ExpectileLevel,
    solver: &ExpectileSolveSettings,
) -> Result<StatisticParts> {
    let t = tau.value();
    let (mut lr, mut lu) = (0.0, 0.0);
    for (i, &x) in draws.observed.iter().enumerate() {
        let mr = empirical_expectile(&draws.restricted[i], tau, solver)?;
        let mu = empirical_expectile(&draws.unrestricted[i], tau, solver)?;
        lr += asym(t, x - mr);
        lu += asym(t, x - mu);
    }
    let n = draws.observed.len() as f64;
    let (lr, lu) = (lr / n, lu / n);
    if !(lr > 0.0 && lu > 0.0) {
        return Err(Error::numeric(format!(
            "undefined log-ratio: restricted loss {lr}, unrestricted loss {lu}"
        )));
    }
    Ok(StatisticParts {
        tau,
        statistic: (lr / lu).ln(),
        restricted_loss: lr,
        unrestricted_loss: lu,
    })
}

fn check_panel(panel: &SeriesPanel) -> Result<()> {
    if panel.n_columns() < 2 {
        return Err(Error::domain(
            "a causality test needs the effect column and at least one cause column",
        ));
    }
    Ok(())
}

fn statistic_with_models(
    panel: &SeriesPanel,
    unrestricted: MVineModel,
    taus: &[ExpectileLevel],
    config: &TestConfig,
    stream: &RandomStream,
) -> Result<GcStatistic> {
    let restricted = restricted_model(&unrestricted)?;
    let t0 = config.resolve_eval_start(panel.n_rows())?;
    let draws = predictive_draws(&restricted, &unrestricted, panel, config.n_predictions, t0, config.draws, stream)?;
    let parts = taus
        .iter()
        .map(|&tau| statistic_from_draws(&draws, tau, &config.solver))
        .collect::<Result<Vec<_>>>()?;
    Ok(GcStatistic {
        parts,
        restricted,
        unrestricted,
    })
}

fn observed_stream(config: &TestConfig) -> RandomStream {
    RandomStream::new(config.seed).derive("observed", 0)
}

/// Part A at every level in `taus`, sharing fits and predictive draws.
pub fn gc_statistics(
    panel: &SeriesPanel,
    taus: &[ExpectileLevel],
    config: &TestConfig,
) -> Result<GcStatistic> {
    config.validate()?;
    check_panel(panel)?;
    let unrestricted = MVineModel::fit(panel, &config.fit_settings())?;
    statistic_with_models(panel, unrestricted, taus, config, &observed_stream(config))
}

/// Part A at `config.tau`.
pub fn gc_statistic(panel: &SeriesPanel, config: &TestConfig) -> Result<GcStatistic> {
    gc_statistics(panel, &[config.tau], config)
}

/// `#{null >= observed}` turned into a p-value.
pub fn p_value(observed: f64, null_statistics: &[f64], rule: PValueRule) -> f64 {
    let count = null_statistics.iter().filter(|&&s| s >= observed).count() as f64;
    let b = null_statistics.len() as f64;
    match rule {
        PValueRule::Plain => count / b,
        PValueRule::PlusOne => (1.0 + count) / (1.0 + b),
    }
}

/// Part B for every level of `observed`: `B` null panels from the
/// unrestricted model, each refitted and re-evaluated from scratch.
/// Replicate `b` uses only `RandomStream::new(seed).derive("replicate", b)`.
pub fn bootstrap_p_values<E: Executor>(
    panel: &SeriesPanel,
    observed: &GcStatistic,
    config: &TestConfig,
    exec: &E,
) -> Result<Vec<GcTestResult>> {
    config.validate()?;
    let taus: Vec<ExpectileLevel> = observed.parts.iter().map(|p| p.tau).collect();
    let root = RandomStream::new(config.seed);
    let t_len = panel.n_rows();
    let settings = config.fit_settings();
    let model = &observed.unrestricted;
    let replicates: Vec<Result<Vec<f64>>> = exec.map_indexed(config.n_bootstrap, |b| {
        let stream = root.derive("replicate", b as u64);
        let null_panel = model.simulate_null_sample(t_len, &stream.derive("null", 0))?;
        let marginals = if config.refit_marginals {
            fit_marginals(&null_panel)?
        } else {
            model.marginals().to_vec()
        };
        let fitted = MVineModel::fit_with_marginals(&null_panel, marginals, &settings)?;
        let stat = statistic_with_models(&null_panel, fitted, &taus, config, &stream.derive("predict", 0))?;
        Ok(stat.parts.iter().map(|p| p.statistic).collect())
    });
    let mut failures: Vec<String> = Vec::new();
    let mut nulls: Vec<Vec<f64>> = vec![Vec::with_capacity(config.n_bootstrap); taus.len()];
    for (b, r) in replicates.into_iter().enumerate() {
        match r {
            Ok(stats) => {
                for (k, s) in stats.into_iter().enumerate() {
                    nulls[k].push(s);
                }
            }
            Err(e) => failures.push(format!("replicate {b}: {e}")),
        }
    }
    let failed = failures.len();
    if failed as f64 > config.failure_cap * config.n_bootstrap as f64 || failed == config.n_bootstrap {
        return Err(Error::numeric(format!(
            "{failed} of {} bootstrap replicates failed; first: {}",
            config.n_bootstrap, failures[0]
        )));
    }
    Ok(observed
        .parts
        .iter()
        .zip(nulls)
        .map(|(part, null_statistics)| GcTestResult {
            tau: part.tau,
            statistic: part.statistic,
            p_value: p_value(part.statistic, &null_statistics, config.p_value_rule),
            null_statistics,
            restricted_loss: part.restricted_loss,
            unrestricted_loss: part.unrestricted_loss,
            failed_replicates: failed,
        })
        .collect())
}

/// Part B at `config.tau`.
pub fn bootstrap_p_value<E: Executor>(
    panel: &SeriesPanel,
    observed: &GcStatistic,
    config: &TestConfig,
    exec: &E,
) -> Result<GcTestResult> {
    let mut all = bootstrap_p_values(panel, observed, config, exec)?;
    Ok(all.swap_remove(0))
}

/// Joint test of all non-effect columns at every level in `taus`.
pub fn run_joint_tests<E: Executor>(
    panel: &SeriesPanel,
    taus: &[ExpectileLevel],
    config: &TestConfig,
    exec: &E,
) -> Result<Vec<GcTestResult>> {
    let observed = gc_statistics(panel, taus, config)?;
    bootstrap_p_values(panel, &observed, config, exec)
}

pub fn run_joint_test<E: Executor>(
    panel: &SeriesPanel,
    config: &TestConfig,
    exec: &E,
) -> Result<GcTestResult> {
    let mut all = run_joint_tests(panel, &[config.tau], config, exec)?;
    Ok(all.swap_remove(0))
}

/// The effect column and `cause_column` only.
pub fn pairwise_panel(panel: &SeriesPanel, cause_column: &str) -> Result<SeriesPanel> {
    let j = panel
        .column_index(cause_column)
        .ok_or_else(|| Error::domain(format!("unknown column '{cause_column}'")))?;
    if j == 0 {
        return Err(Error::domain(format!(
            "'{cause_column}' is the effect column, not a cause"
        )));
    }
    panel.select(&[0, j])
}

pub fn run_pairwise_tests<E: Executor>(
    panel: &SeriesPanel,
    cause_column: &str,
    taus: &[ExpectileLevel],
    config: &TestConfig,
    exec: &E,
) -> Result<Vec<GcTestResult>> {
    run_joint_tests(&pairwise_panel(panel, cause_column)?, taus, config, exec)
}

pub fn run_pairwise_test<E: Executor>(
    panel: &SeriesPanel,
    cause_column: &str,
    config: &TestConfig,
    exec: &E,
) -> Result<GcTestResult> {
    run_joint_test(&pairwise_panel(panel, cause_column)?, config, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df1: usize,
    pub df2: usize,
}

/// Linear Granger test in the mean with one lag: OLS of `X_t` on
/// `(1, X_{t-1})` against `(1, X_{t-1}, Z_{1,t-1}, ..., Z_{d,t-1})`.
pub fn linear_f_test(panel: &SeriesPanel, lags: usize) -> Result<FTestResult> {
    if lags != 1 {
        return Err(Error::domain(format!("only one lag is supported, got {lags}")));
    }
    check_panel(panel)?;
    let m = panel.n_columns();
    let d = m - 1;
    let n = panel.n_rows() - 1;
    let k = d + 2;
    if n < k + 1 {
        return Err(Error::domain(format!(
            "F-test needs more than {} rows, got {}",
            k + 1,
            n + 1
        )));
    }
    let x = panel.column(0);
    let y = &x[1..];
    let mut restricted = Vec::with_capacity(2 * n);
    let mut full = Vec::with_capacity(k * n);
    for t in 0..n {
        restricted.extend_from_slice(&[1.0, x[t]]);
        full.push(1.0);
        for c in 0..m {
            full.push(panel.column(c)[t]);
        }
    }
    let (_, rss_r) = least_squares(&restricted, 2, y)?;
    let (_, rss_u) = least_squares(&full, k, y)?;
    let df2 = n - k;
    if !(rss_u > 0.0) {
        return Err(Error::numeric("F-test: unrestricted regression fits exactly"));
    }
    let f = ((rss_r - rss_u) / d as f64) / (rss_u / df2 as f64);
    let f = f.max(0.0);
    Ok(FTestResult {
        statistic: f,
        p_value: f_sf(f, d as f64, df2 as f64),
        df1: d,
        df2,
    })
}
