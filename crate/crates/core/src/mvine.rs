//! M-vine copula models for order-1 Markov panels `(X_t, Z_{1,t}, ..., Z_{d,t})`.
//!
//! With `m = d + 1` variables the joint law of two consecutive rows is a
//! D-vine over `2m` positions:
//!
//! ```text
//! position   0        ...  m-2        m-1        m      m+1       ...  2m-1
//! variable   Z_d(t-1) ...  Z_1(t-1)   X(t-1)     X(t)   Z_1(t)    ...  Z_d(t)
//! ```
//!
//! Edge `(a, a + l)` lives in tree `l`. Edges inside one time block are the
//! edges of the in-time D-vine on `(X, Z_1, ..., Z_d)` and carry the same
//! copula in both blocks (the past block sees it with arguments swapped).
//! Edges crossing the time boundary are fitted up to the truncation level and
//! are independence above it. The copula `c_{X(t-1), X(t)}` is the tree-1
//! cross edge `(m - 1, m)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::bicop::{select_in, BivariateCopula, CopulaFamily, PairSample, SelectionCriterion};
use crate::error::{Error, Result};
use crate::marginal::EmpiricalMarginal;
use crate::rng::RandomStream;

/// Shortest panel accepted by the fitter.
pub const MIN_ROWS: usize = 20;

pub const MODEL_FORMAT: &str = "eg-mvine/1";

/// Named columns of equal length; column 0 is the effect series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPanel {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SeriesPanel {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::domain("panel needs at least one column"));
        }
        if names.len() != columns.len() {
            return Err(Error::domain("panel names and columns differ in count"));
        }
        let t = columns[0].len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != t {
                return Err(Error::domain(format!(
                    "column '{name}' has {} rows, expected {t}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|x| !x.is_finite()) {
                return Err(Error::domain(format!("column '{name}' has a non-finite value at row {i}")));
            }
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::domain(format!("duplicate column name '{a}'")));
            }
        }
        Ok(Self { names, columns })
    }

    /// Columns named `x`, `z1`, `z2`, ...
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..columns.len())
            .map(|i| if i == 0 { "x".to_string() } else { format!("z{i}") })
            .collect();
        Self::new(names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Sub-panel with the given columns, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut names = Vec::with_capacity(indices.len());
        let mut cols = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.columns.len() {
                return Err(Error::domain(format!("column index {i} out of range")));
            }
            names.push(self.names[i].clone());
            cols.push(self.columns[i].clone());
        }
        Self::new(names, cols)
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }
}

/// Which cross-time edges a fit estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    /// Every cross edge up to the truncation level.
    #[default]
    Full,
    /// Only the cross edges ending in `X(t)`, which are all that one-step
    /// predictions of `X` and null-sample generation use. Joint path
    /// simulation then treats the remaining cross edges as independence.
    Predictive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub catalog: Vec<CopulaFamily>,
    pub criterion: SelectionCriterion,
    /// Highest tree with fitted cross edges; `None` means `d + 1`.
    pub truncation: Option<usize>,
    pub scope: FitScope,
    pub markov_order: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            catalog: CopulaFamily::default_catalog(),
            criterion: SelectionCriterion::Aic,
            truncation: None,
            scope: FitScope::Full,
            markov_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MVineModel {
    names: Vec<String>,
    marginals: Vec<EmpiricalMarginal>,
    truncation: usize,
    scope: FitScope,
    /// `in_time[l - 1][i]`: copula of the in-time pair `(i, i + l)`.
    in_time: Vec<Vec<BivariateCopula>>,
    /// `cross[l - 1][j]`: the `j`-th crossing edge of tree `l`.
    cross: Vec<Vec<BivariateCopula>>,
    /// Every edge of the two-row D-vine, `big[l - 1][a]` for edge `(a, a + l)`.
    big: Vec<Vec<BivariateCopula>>,
}

// first position of a crossing edge in tree l
fn cross_start(m: usize, l: usize) -> usize {
    m.saturating_sub(l)
}

fn cross_count(m: usize, l: usize) -> usize {
    if l <= m {
        l
    } else {
        2 * m - l
    }
}

enum EdgeAction {
    Fit,
    Fixed(BivariateCopula),
    Skip,
}

// Sequential D-vine estimation on column data. `action(l, a)` decides each
// edge; h-transforms are propagated for every non-skipped edge below
// `max_tree`.
fn fit_dvine(
    columns: Vec<Vec<f64>>,
    max_tree: usize,
    settings: &FitSettings,
    mut action: impl FnMut(usize, usize) -> EdgeAction,
) -> Result<Vec<Vec<Option<BivariateCopula>>>> {
    let p = columns.len();
    let mut out: Vec<Vec<Option<BivariateCopula>>> = Vec::new();
    let mut fwd: Vec<Vec<f64>> = columns.clone();
    let mut bwd: Vec<Vec<f64>> = columns;
    for l in 1..=max_tree.min(p.saturating_sub(1)) {
        let mut level = vec![None; p - l];
        let mut next_fwd = vec![Vec::new(); p];
        let mut next_bwd = vec![Vec::new(); p];
        for a in 0..p - l {
            let c = match action(l, a) {
                EdgeAction::Skip => continue,
                EdgeAction::Fixed(c) => c,
                EdgeAction::Fit => {
                    let (u, v) = (&fwd[a], &bwd[a + l]);
                    if u.is_empty() || v.is_empty() {
                        return Err(Error::State(format!(
                            "vine edge ({a}, {}) in tree {l} lacks its inputs",
                            a + l
                        )));
                    }
                    let mut sample = PairSample::new(u, v)?;
                    select_in(&mut sample, &settings.catalog, settings.criterion)?.copula
                }
            };
            if l < max_tree {
                let (u, v) = (&fwd[a], &bwd[a + l]);
                if !u.is_empty() && !v.is_empty() {
                    if c.is_independence() {
                        next_fwd[a] = u.clone();
                        next_bwd[a + l] = v.clone();
                    } else {
                        next_fwd[a] = u.iter().zip(v).map(|(&x, &y)| c.h1(x, y)).collect();
                        next_bwd[a + l] = u.iter().zip(v).map(|(&x, &y)| c.h2(x, y)).collect();
                    }
                }
            }
            level[a] = Some(c);
        }
        out.push(level);
        fwd = next_fwd;
        bwd = next_bwd;
    }
    Ok(out)
}

impl MVineModel {
    /// Fits marginals and pair copulas to `panel`.
    pub fn fit(panel: &SeriesPanel, settings: &FitSettings) -> Result<Self> {
        let marginals = fit_marginals(panel)?;
        Self::fit_with_marginals(panel, marginals, settings)
    }

    /// Fits the pair copulas with the given marginals, one per column.
    pub fn fit_with_marginals(
        panel: &SeriesPanel,
        marginals: Vec<EmpiricalMarginal>,
        settings: &FitSettings,
    ) -> Result<Self> {
        if settings.markov_order != 1 {
            return Err(Error::domain(format!(
                "only Markov order 1 is supported, got {}",
                settings.markov_order
            )));
        }
        let t_len = panel.n_rows();
        if t_len < MIN_ROWS {
            return Err(Error::domain(format!(
                "panel has {t_len} rows, at least {MIN_ROWS} are needed"
            )));
        }
        let m = panel.n_columns();
        if marginals.len() != m {
            return Err(Error::domain("one marginal per column is required"));
        }
        let trunc = settings.truncation.unwrap_or(m);
        if trunc == 0 || trunc > 2 * m - 1 {
            return Err(Error::domain(format!(
                "truncation must lie in 1..={}, got {trunc}",
                2 * m - 1
            )));
        }
        let pseudo: Vec<Vec<f64>> = marginals
            .iter()
            .zip(panel.columns())
            .map(|(mg, col)| mg.pseudo_observations(col))
            .collect();

        // in-time D-vine on all T rows, order X, Z_1, ..., Z_d
        let in_levels = fit_dvine(pseudo.clone(), m - 1, settings, |_, _| EdgeAction::Fit)?;
        let in_time: Vec<Vec<BivariateCopula>> = in_levels
            .into_iter()
            .map(|lv| lv.into_iter().map(|c| c.expect("in-time edge")).collect())
            .collect();

        // two-row D-vine on the T - 1 lagged rows
        let mut cols = Vec::with_capacity(2 * m);
        for p in 0..m {
            cols.push(pseudo[m - 1 - p][..t_len - 1].to_vec());
        }
        for p in 0..m {
            cols.push(pseudo[p][1..].to_vec());
        }
        let scope = settings.scope;
        let big_levels = fit_dvine(cols, trunc, settings, |l, a| {
            if a + l < m {
                let i = m - 1 - a - l;
                EdgeAction::Fixed(in_time[l - 1][i].swapped())
            } else if a >= m {
                EdgeAction::Fixed(in_time[l - 1][a - m])
            } else if scope == FitScope::Predictive && a + l != m {
                EdgeAction::Skip
            } else {
                EdgeAction::Fit
            }
        })?;
        let mut cross = Vec::with_capacity(2 * m - 1);
        for l in 1..=2 * m - 1 {
            let start = cross_start(m, l);
            let edges = (0..cross_count(m, l))
                .map(|j| {
                    big_levels
                        .get(l - 1)
                        .and_then(|lv| lv[start + j])
                        .unwrap_or_else(BivariateCopula::independence)
                })
                .collect();
            cross.push(edges);
        }
        Self::assemble(panel.names().to_vec(), marginals, trunc, scope, in_time, cross)
    }

    fn assemble(
        names: Vec<String>,
        marginals: Vec<EmpiricalMarginal>,
        truncation: usize,
        scope: FitScope,
        in_time: Vec<Vec<BivariateCopula>>,
        cross: Vec<Vec<BivariateCopula>>,
    ) -> Result<Self> {
        let m = marginals.len();
        if m == 0 || names.len() != m {
            return Err(Error::domain("model needs one name and one marginal per column"));
        }
        if in_time.len() != m - 1 || in_time.iter().enumerate().any(|(k, lv)| lv.len() != m - 1 - k) {
            return Err(Error::domain("in-time vine has the wrong shape"));
        }
        if cross.len() != 2 * m - 1
            || cross.iter().enumerate().any(|(k, lv)| lv.len() != cross_count(m, k + 1))
        {
            return Err(Error::domain("cross-time edges have the wrong shape"));
        }
        let mut big = Vec::with_capacity(2 * m - 1);
        for l in 1..2 * m {
            let level: Vec<BivariateCopula> = (0..2 * m - l)
                .map(|a| {
                    if a + l < m {
                        in_time[l - 1][m - 1 - a - l].swapped()
                    } else if a >= m {
                        in_time[l - 1][a - m]
                    } else {
                        cross[l - 1][a - cross_start(m, l)]
                    }
                })
                .collect();
            big.push(level);
        }
        Ok(Self {
            names,
            marginals,
            truncation,
            scope,
            in_time,
            cross,
            big,
        })
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn markov_order(&self) -> usize {
        1
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn scope(&self) -> FitScope {
        self.scope
    }

    pub fn marginals(&self) -> &[EmpiricalMarginal] {
        &self.marginals
    }

    /// In-time copula of the pair `(i, i + l)` (variables in panel order).
    pub fn in_time_edge(&self, l: usize, i: usize) -> &BivariateCopula {
        &self.in_time[l - 1][i]
    }

    /// Copula of two-row D-vine edge `(a, a + l)`.
    pub fn edge(&self, l: usize, a: usize) -> &BivariateCopula {
        &self.big[l - 1][a]
    }

    /// `c_{X(t-1), X(t)}`.
    pub fn temporal_copula(&self) -> &BivariateCopula {
        let m = self.dimension();
        &self.big[0][m - 1]
    }

    /// Conditioning inputs for a one-step prediction of `X(t)` from the
    /// previous row: entry `l - 1` is `F(position m - l | positions m - l + 1 .. m - 1)`.
    pub fn predictive_inputs(&self, previous_row: &[f64]) -> Result<Vec<f64>> {
        let m = self.dimension();
        if previous_row.len() != m {
            return Err(Error::domain(format!(
                "conditioning row has {} values, the model has {m} variables",
                previous_row.len()
            )));
        }
        if let Some(x) = previous_row.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain(format!("non-finite conditioning value {x}")));
        }
        let u: Vec<f64> = (0..m).map(|p| self.marginals[m - 1 - p].cdf(previous_row[m - 1 - p])).collect();
        let (fwd, _) = self.past_triangle(&u);
        Ok((1..=m).map(|l| fwd[l - 1][m - l]).collect())
    }

    // fwd[j][a] = F(a | a+1..a+j), bwd[j][b] = F(b | b-j..b-1) on past positions
    fn past_triangle(&self, u_past: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let m = u_past.len();
        let mut fwd = vec![vec![0.0; m]; m];
        let mut bwd = vec![vec![0.0; m]; m];
        fwd[0].copy_from_slice(u_past);
        bwd[0].copy_from_slice(u_past);
        for l in 1..m {
            for a in 0..m - l {
                let c = &self.big[l - 1][a];
                let (x, y) = (fwd[l - 1][a], bwd[l - 1][a + l]);
                fwd[l][a] = c.h1(x, y);
                bwd[l][a + l] = c.h2(x, y);
            }
        }
        (fwd, bwd)
    }

    /// Maps a uniform `w` to a draw of `U_X(t)` given the inputs from
    /// [`predictive_inputs`](Self::predictive_inputs).
    #[inline]
    pub fn invert_predictive(&self, inputs: &[f64], w: f64) -> f64 {
        let m = self.dimension();
        let mut v = w;
        for l in (1..=m).rev() {
            v = self.big[l - 1][m - l].h2_inverse(v, inputs[l - 1]);
        }
        v
    }

    /// `n` draws of `X(t)` given the previous row.
    pub fn conditional_predictive_sample(
        &self,
        previous_row: &[f64],
        n: usize,
        rng: &mut RandomStream,
    ) -> Result<Vec<f64>> {
        let inputs = self.predictive_inputs(previous_row)?;
        let x = &self.marginals[0];
        Ok((0..n)
            .map(|_| x.quantile_unchecked(self.invert_predictive(&inputs, rng.uniform())))
            .collect())
    }

    // Completes an in-time row on the uniform scale. `u[0]` must hold the X
    // value; positions 1..m are drawn from `rng` in order.
    fn sample_in_time_given_x(&self, u: &mut [f64], rng: &mut RandomStream) {
        let m = u.len();
        if m == 1 {
            return;
        }
        let mut fwd = vec![vec![0.0; m]; m];
        let mut bwd = vec![vec![0.0; m]; m];
        fwd[0][0] = u[0];
        bwd[0][0] = u[0];
        for k in 1..m {
            let w = rng.uniform();
            bwd[k][k] = w;
            for l in (1..=k).rev() {
                let c = &self.in_time[l - 1][k - l];
                bwd[l - 1][k] = c.h2_inverse(bwd[l][k], fwd[l - 1][k - l]);
            }
            u[k] = bwd[0][k];
            fwd[0][k] = u[k];
            for l in 1..=k {
                let c = &self.in_time[l - 1][k - l];
                let (x, y) = (fwd[l - 1][k - l], bwd[l - 1][k]);
                fwd[l][k - l] = c.h1(x, y);
                if l < k {
                    bwd[l][k] = c.h2(x, y);
                }
            }
        }
    }

    fn to_values(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.marginals)
            .map(|(&p, mg)| mg.quantile_unchecked(p))
            .collect()
    }

    /// Null-hypothesis panel: `X` follows the Markov chain of the temporal
    /// copula, and each row's `Z` is drawn from the in-time vine given that
    /// row's `X`. No lagged `Z` enters `X`.
    pub fn simulate_null_sample(&self, t_len: usize, rng: &RandomStream) -> Result<SeriesPanel> {
        if t_len < 2 {
            return Err(Error::domain("simulated panels need at least 2 rows"));
        }
        let m = self.dimension();
        let temporal = self.temporal_copula();
        let mut cols = vec![Vec::with_capacity(t_len); m];
        let mut ux = 0.0;
        let mut u = vec![0.0; m];
        for t in 0..t_len {
            let mut r = rng.derive("row", t as u64);
            let w = r.uniform();
            ux = if t == 0 { w } else { temporal.h2_inverse(w, ux) };
            u[0] = ux;
            self.sample_in_time_given_x(&mut u, &mut r);
            for (col, x) in cols.iter_mut().zip(self.to_values(&u)) {
                col.push(x);
            }
        }
        SeriesPanel::new(self.names.clone(), cols)
    }

    /// Joint simulation through every fitted edge: the first row from the
    /// in-time vine, later rows from the two-row vine given the previous row.
    pub fn simulate_path(&self, t_len: usize, rng: &RandomStream) -> Result<SeriesPanel> {
        if t_len < 1 {
            return Err(Error::domain("simulated panels need at least 1 row"));
        }
        let m = self.dimension();
        let p = 2 * m;
        let mut cols = vec![Vec::with_capacity(t_len); m];
        let mut row = vec![0.0; m];
        {
            let mut r = rng.derive("row", 0);
            row[0] = r.uniform();
            self.sample_in_time_given_x(&mut row, &mut r);
        }
        for (col, x) in cols.iter_mut().zip(self.to_values(&row)) {
            col.push(x);
        }
        let mut fwd = vec![vec![0.0; p]; p];
        let mut bwd = vec![vec![0.0; p]; p];
        for t in 1..t_len {
            let mut r = rng.derive("row", t as u64);
            for a in 0..m {
                fwd[0][a] = row[m - 1 - a];
                bwd[0][a] = row[m - 1 - a];
            }
            for l in 1..m {
                for a in 0..m - l {
                    let c = &self.big[l - 1][a];
                    let (x, y) = (fwd[l - 1][a], bwd[l - 1][a + l]);
                    fwd[l][a] = c.h1(x, y);
                    bwd[l][a + l] = c.h2(x, y);
                }
            }
            for k in m..p {
                bwd[k][k] = r.uniform();
                for l in (1..=k).rev() {
                    let c = &self.big[l - 1][k - l];
                    bwd[l - 1][k] = c.h2_inverse(bwd[l][k], fwd[l - 1][k - l]);
                }
                fwd[0][k] = bwd[0][k];
                for l in 1..=k {
                    let c = &self.big[l - 1][k - l];
                    let (x, y) = (fwd[l - 1][k - l], bwd[l - 1][k]);
                    fwd[l][k - l] = c.h1(x, y);
                    if l < k {
                        bwd[l][k] = c.h2(x, y);
                    }
                }
            }
            for i in 0..m {
                row[i] = bwd[0][m + i];
            }
            for (col, x) in cols.iter_mut().zip(self.to_values(&row)) {
                col.push(x);
            }
        }
        SeriesPanel::new(self.names.clone(), cols)
    }

    /// Builds a model from explicit parts. `in_time[l - 1][i]` is the copula
    /// of in-time pair `(i, i + l)`; `cross[l - 1][j]` the `j`-th crossing edge
    /// of tree `l`, where tree `l` crosses at positions `max(0, m - l) ..`.
    pub fn from_parts(
        names: Vec<String>,
        marginals: Vec<EmpiricalMarginal>,
        in_time: Vec<Vec<BivariateCopula>>,
        cross: Vec<Vec<BivariateCopula>>,
    ) -> Result<Self> {
        let m = marginals.len();
        let truncation = cross
            .iter()
            .rposition(|lv| lv.iter().any(|c| !c.is_independence()))
            .map_or(1, |k| k + 1)
            .max(m.min(2 * m - 1));
        Self::assemble(names, marginals, truncation, FitScope::Full, in_time, cross)
    }
}

/// Empirical marginal of every column; constant columns are rejected.
pub fn fit_marginals(panel: &SeriesPanel) -> Result<Vec<EmpiricalMarginal>> {
    panel
        .columns()
        .iter()
        .zip(panel.names())
        .map(|(col, name)| {
            let mg = EmpiricalMarginal::fit(col)?;
            if mg.is_degenerate() {
                Err(Error::domain(format!("column '{name}' is constant")))
            } else {
                Ok(mg)
            }
        })
        .collect()
}

/// One edge of a serialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub tree: usize,
    /// D-vine positions `(a, a + tree)`.
    pub positions: [usize; 2],
    /// Human-readable variables, e.g. `x(t-1) - x(t) | ...`.
    pub label: String,
    pub copula: BivariateCopula,
}

/// Serialized form of [`MVineModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub columns: Vec<String>,
    pub markov_order: usize,
    pub truncation: usize,
    pub scope: FitScope,
    pub marginals: Vec<EmpiricalMarginal>,
    /// Edges of the in-time D-vine, positions in panel order.
    pub in_time_edges: Vec<EdgeRecord>,
    /// Edges of the two-row D-vine that cross the time boundary.
    pub cross_edges: Vec<EdgeRecord>,
}

impl MVineModel {
    fn position_name(&self, p: usize) -> String {
        let m = self.dimension();
        if p < m {
            format!("{}(t-1)", self.names[m - 1 - p])
        } else {
            format!("{}(t)", self.names[p - m])
        }
    }

    fn edge_label(&self, names: impl Fn(usize) -> String, a: usize, l: usize) -> String {
        let mut s = format!("{} - {}", names(a), names(a + l));
        if l > 1 {
            let cond: Vec<String> = (a + 1..a + l).map(&names).collect();
            s.push_str(" | ");
            s.push_str(&cond.join(", "));
        }
        s
    }

    pub fn to_document(&self) -> ModelDocument {
        let m = self.dimension();
        let mut in_time_edges = Vec::new();
        for (k, lv) in self.in_time.iter().enumerate() {
            for (i, c) in lv.iter().enumerate() {
                in_time_edges.push(EdgeRecord {
                    tree: k + 1,
                    positions: [i, i + k + 1],
                    label: self.edge_label(|p| self.names[p].clone(), i, k + 1),
                    copula: *c,
                });
            }
        }
        let mut cross_edges = Vec::new();
        for (k, lv) in self.cross.iter().enumerate() {
            let l = k + 1;
            for (j, c) in lv.iter().enumerate() {
                let a = cross_start(m, l) + j;
                cross_edges.push(EdgeRecord {
                    tree: l,
                    positions: [a, a + l],
                    label: self.edge_label(|p| self.position_name(p), a, l),
                    copula: *c,
                });
            }
        }
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            columns: self.names.clone(),
            markov_order: 1,
            truncation: self.truncation,
            scope: self.scope,
            marginals: self.marginals.clone(),
            in_time_edges,
            cross_edges,
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT {
            return Err(Error::domain(format!(
                "unsupported model format '{}', expected '{MODEL_FORMAT}'",
                doc.format
            )));
        }
        if doc.markov_order != 1 {
            return Err(Error::domain("only Markov order 1 is supported"));
        }
        let m = doc.marginals.len();
        if m == 0 || doc.columns.len() != m {
            return Err(Error::domain("model needs one column name per marginal"));
        }
        let mut in_time: Vec<Vec<Option<BivariateCopula>>> =
            (1..m).map(|l| vec![None; m - l]).collect();
        for e in &doc.in_time_edges {
            let [a, b] = e.positions;
            if e.tree == 0 || e.tree >= m || b != a + e.tree || b >= m {
                return Err(Error::domain(format!(
                    "in-time edge {:?} does not fit tree {} of a {m}-variable vine",
                    e.positions, e.tree
                )));
            }
            in_time[e.tree - 1][a] = Some(e.copula);
        }
        let mut cross: Vec<Vec<Option<BivariateCopula>>> =
            (1..2 * m).map(|l| vec![None; cross_count(m, l)]).collect();
        for e in &doc.cross_edges {
            let [a, b] = e.positions;
            let l = e.tree;
            if l == 0 || l >= 2 * m || b != a + l || a >= m || b < m || b >= 2 * m {
                return Err(Error::domain(format!(
                    "cross edge {:?} does not fit tree {l} of a {m}-variable vine",
                    e.positions
                )));
            }
            cross[l - 1][a - cross_start(m, l)] = Some(e.copula);
        }
        let in_time = in_time
            .into_iter()
            .enumerate()
            .map(|(k, lv)| {
                lv.into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.ok_or_else(|| Error::domain(format!("missing in-time edge ({i}, {}) in tree {}", i + k + 1, k + 1)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let cross = cross
            .into_iter()
            .enumerate()
            .map(|(k, lv)| {
                lv.into_iter()
                    .enumerate()
                    .map(|(j, c)| {
                        c.ok_or_else(|| {
                            Error::domain(format!("missing cross edge {j} in tree {}", k + 1))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if doc.truncation == 0 || doc.truncation > 2 * m - 1 {
            return Err(Error::domain("truncation out of range"));
        }
        Self::assemble(doc.columns, doc.marginals, doc.truncation, doc.scope, in_time, cross)
    }
}
