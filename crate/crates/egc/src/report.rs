//! Result documents, text tables and the Monte-Carlo CSV.

use std::fmt::Write as _;

use egc_core::dgp::McReport;
use egc_core::gc::GcTestResult;
use serde::{Deserialize, Serialize};

pub const RESULT_SCHEMA: &str = "eg-result/1";
pub const TOOL: &str = "egc";

/// Everything needed to reproduce an output file. Thread counts are left
/// out on purpose: they never change a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub output: Option<String>,
    pub seed: Option<u64>,
    pub taus: Vec<f64>,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: Vec::new(),
            output: None,
            seed: None,
            taus: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    /// Single-line JSON, for CSV comment headers.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument<T> {
    pub schema: String,
    pub manifest: RunManifest,
    pub payload: T,
}

impl<T: Serialize> ResultDocument<T> {
    pub fn new(manifest: RunManifest, payload: T) -> Self {
        Self {
            schema: RESULT_SCHEMA.to_string(),
            manifest,
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    /// `joint` or `pairwise:<column>`.
    pub test: String,
    pub tau: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub restricted_loss: f64,
    pub unrestricted_loss: f64,
    pub bootstrap_replicates: usize,
    pub failed_replicates: usize,
}

impl TestRow {
    pub fn from_result(test: &str, r: &GcTestResult) -> Self {
        Self {
            test: test.to_string(),
            tau: r.tau.value(),
            statistic: r.statistic,
            p_value: r.p_value,
            restricted_loss: r.restricted_loss,
            unrestricted_loss: r.unrestricted_loss,
            bootstrap_replicates: r.null_statistics.len(),
            failed_replicates: r.failed_replicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub effect: String,
    pub causes: Vec<String>,
    pub observations: usize,
    pub eval_start: usize,
    pub rows: Vec<TestRow>,
}

/// `*` below 0.10, `**` below 0.05, `***` below 0.01.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

fn distinct_in_order<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// One row per test, one column per level, p-values with stars.
pub fn test_table(report: &TestReport) -> String {
    let taus = distinct_in_order(report.rows.iter().map(|r| r.tau));
    let tests = distinct_in_order(report.rows.iter().map(|r| r.test.clone()));
    let label_width = tests.iter().map(String::len).max().unwrap_or(4).max(4) + 2;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} <- {}  (T = {}, evaluated from t = {})",
        report.effect,
        report.causes.join(", "),
        report.observations,
        report.eval_start
    );
    let _ = write!(out, "{:<label_width$}", "test");
    for tau in &taus {
        let _ = write!(out, "{:>11}", format!("tau={tau}"));
    }
    out.push('\n');
    for test in &tests {
        let _ = write!(out, "{test:<label_width$}");
        for tau in &taus {
            let cell = report
                .rows
                .iter()
                .find(|r| &r.test == test && r.tau == *tau)
                .map(|r| format!("{:.3}{:<3}", r.p_value, stars(r.p_value)))
                .unwrap_or_default();
            let _ = write!(out, "{cell:>11}");
        }
        out.push('\n');
    }
    out.push_str("p-values; * p<0.10, ** p<0.05, *** p<0.01\n");
    out
}

const MC_HEADER: &str = "dgp,t,test,tau,replications,rejections,failures,rate,valid";

/// One line per cell, preceded by the manifest as a comment.
pub fn mc_csv(report: &McReport, manifest: &RunManifest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schema: {RESULT_SCHEMA}");
    let _ = writeln!(out, "# manifest: {}", manifest.to_line());
    out.push_str(MC_HEADER);
    out.push('\n');
    for c in &report.cells {
        let tau = c.tau.map(|t| t.value().to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.dgp, c.t_len, c.test, tau, c.replications, c.rejections, c.failures, c.rate, c.valid
        );
    }
    out
}

/// Rejection rates laid out with designs and lengths as rows and one block
/// of level columns per test.
pub fn mc_table(report: &McReport) -> String {
    let tests = distinct_in_order(report.cells.iter().map(|c| c.test.clone()));
    let rows = distinct_in_order(report.cells.iter().map(|c| (c.dgp, c.t_len)));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "rejection rates at alpha = {} (S = {}, B = {}, N = {})",
        report.alpha, report.replications, report.n_bootstrap, report.n_predictions
    );
    for test in tests {
        let taus = distinct_in_order(
            report
                .cells
                .iter()
                .filter(|c| c.test == test)
                .map(|c| c.tau.map(|t| t.value())),
        );
        let _ = writeln!(out, "\n[{test}]");
        let _ = write!(out, "{:<6}{:>6}", "dgp", "T");
        for tau in &taus {
            let head = tau.map(|t| format!("tau={t}")).unwrap_or_else(|| "rate".to_string());
            let _ = write!(out, "{head:>10}");
        }
        out.push('\n');
        for &(dgp, t_len) in &rows {
            let _ = write!(out, "{:<6}{:>6}", dgp.as_str(), t_len);
            for tau in &taus {
                let cell = report.cell(dgp, *tau, t_len, &test).map(|c| {
                    if c.valid {
                        format!("{:.3}", c.rate)
                    } else {
                        format!("{:.3}!", c.rate)
                    }
                });
                let _ = write!(out, "{:>10}", cell.unwrap_or_default());
            }
            out.push('\n');
        }
    }
    if report.cells.iter().any(|c| !c.valid) {
        out.push_str("! more than 5% of the replications failed\n");
    }
    out
}
