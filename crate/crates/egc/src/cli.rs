//! Command-line surface: `test`, `fit`, `simulate` and `mc`.

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use egc_core::bicop::SelectionCriterion;
use egc_core::dgp::{mc_study, simulate_dgp, DgpSpec, DgpTag, McSettings, TestSelection, DEFAULT_BURN_IN};
use egc_core::gc::{run_joint_tests, run_pairwise_tests, DrawScheme, PValueRule, TestConfig};
use egc_core::mvine::{FitSettings, MVineModel, ModelDocument};
use egc_core::{ExpectileLevel, RandomStream};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::exec::RayonExecutor;
use crate::io::{panel_csv, read_panel, read_text, write_text, PanelOptions};
use crate::report::{mc_csv, mc_table, test_table, ResultDocument, RunManifest, TestReport, TestRow};

pub const DEFAULT_TAUS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

#[derive(Debug, Parser)]
#[command(name = "egc", version, about = "Granger causality in expectiles with M-vine copulas")]
pub struct Cli {
    /// Worker threads; 0 or absent uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether the cause columns Granger-cause the effect column.
    Test(TestArgs),
    /// Fit an M-vine model and write it as JSON.
    Fit(FitArgs),
    /// Simulate a panel from a reference design or a fitted model.
    Simulate(SimulateArgs),
    /// Monte-Carlo size and power study.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Aic,
    Bic,
}

impl From<CriterionArg> for SelectionCriterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Aic => SelectionCriterion::Aic,
            CriterionArg::Bic => SelectionCriterion::Bic,
        }
    }
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Effect column; defaults to the first data column.
    #[arg(long)]
    pub effect: Option<String>,
    /// Comma-separated cause columns; defaults to all other data columns.
    #[arg(long, value_delimiter = ',')]
    pub causes: Vec<String>,
    /// Column to ignore, typically dates.
    #[arg(long)]
    pub date_column: Option<String>,
    /// Use percentage log-returns of every selected column.
    #[arg(long)]
    pub log_returns: bool,
}

impl PanelArgs {
    fn options(&self) -> PanelOptions {
        PanelOptions {
            effect: self.effect.clone(),
            causes: self.causes.clone(),
            date_column: self.date_column.clone(),
            log_returns: self.log_returns,
        }
    }

    fn manifest_entry(&self) -> serde_json::Value {
        json!({
            "effect": self.effect,
            "causes": self.causes,
            "date_column": self.date_column,
            "log_returns": self.log_returns,
        })
    }
}

#[derive(Debug, Args)]
pub struct FitOptions {
    #[arg(long, value_enum, default_value = "aic")]
    pub criterion: CriterionArg,
    /// Last fitted tree; deeper edges are independence.
    #[arg(long)]
    pub truncation: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Comma-separated expectile levels.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TAUS)]
    pub taus: Vec<f64>,
    /// Draws per prediction.
    #[arg(long = "n-predictions", short = 'n', default_value_t = 200)]
    pub n_predictions: usize,
    /// First evaluated time (1-based); defaults to half the sample.
    #[arg(long)]
    pub eval_start: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long, short = 'b', default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, env = "EG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also test each cause column on its own.
    #[arg(long)]
    pub pairwise: bool,
    /// Use (1 + count) / (1 + B) for p-values.
    #[arg(long)]
    pub plus_one: bool,
    /// Keep the observed marginals on bootstrap panels.
    #[arg(long)]
    pub fixed_marginals: bool,
    /// Let both models share the uniforms behind their predictive draws.
    #[arg(long)]
    pub common_draws: bool,
    #[command(flatten)]
    pub fit: FitOptions,
    /// JSON result file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Model JSON file; printed when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["dgp", "model"])))]
pub struct SimulateArgs {
    /// Reference design: S1, S2, P1, P2, P3 or P4.
    #[arg(long)]
    pub dgp: Option<DgpTag>,
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of rows.
    #[arg(long = "T", visible_alias = "length")]
    pub t_len: usize,
    #[arg(long, env = "EG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// CSV file; printed when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DgpTag::ALL)]
    pub dgps: Vec<DgpTag>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    pub taus: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 500])]
    pub lengths: Vec<usize>,
    /// Replications per cell (S).
    #[arg(long, short = 's', default_value_t = 100)]
    pub replications: usize,
    /// Bootstrap replicates per test (B).
    #[arg(long, short = 'b', default_value_t = 100)]
    pub bootstrap: usize,
    /// Draws per prediction (N).
    #[arg(long = "n-predictions", short = 'n', default_value_t = 100)]
    pub n_predictions: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = "EG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of joint, pairwise, ftest.
    #[arg(long, value_delimiter = ',', default_value = "joint")]
    pub tests: Vec<TestName>,
    /// Let both models share the uniforms behind their predictive draws.
    #[arg(long)]
    pub common_draws: bool,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[command(flatten)]
    pub fit: FitOptions,
    /// CSV file with one row per cell.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestName {
    Joint,
    Pairwise,
    Ftest,
}

fn levels(taus: &[f64]) -> CliResult<Vec<ExpectileLevel>> {
    if taus.is_empty() {
        return Err(CliError::input("at least one expectile level is needed"));
    }
    Ok(taus.iter().map(|&t| ExpectileLevel::new(t)).collect::<Result<_, _>>()?)
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn fit_settings(opts: &FitOptions) -> FitSettings {
    FitSettings {
        criterion: opts.criterion.into(),
        truncation: opts.truncation,
        ..FitSettings::default()
    }
}

fn catalog_labels(config: &TestConfig) -> Vec<String> {
    config.catalog.iter().map(|f| f.label()).collect()
}

/// Runs one command and returns what goes to standard output.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Test(args) => cmd_test(&args, cli.threads),
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Mc(args) => cmd_mc(&args, cli.threads),
    }
}

fn draw_scheme(common: bool) -> DrawScheme {
    if common {
        DrawScheme::Common
    } else {
        DrawScheme::Independent
    }
}

pub fn cmd_test(args: &TestArgs, threads: Option<usize>) -> CliResult<String> {
    let panel = read_panel(&args.panel.input, &args.panel.options())?;
    let taus = levels(&args.taus)?;
    let mut config = TestConfig::new(taus[0]);
    config.n_predictions = args.n_predictions;
    config.eval_start = args.eval_start;
    config.n_bootstrap = args.bootstrap;
    config.seed = args.seed;
    config.criterion = args.fit.criterion.into();
    config.truncation = args.fit.truncation;
    config.refit_marginals = !args.fixed_marginals;
    config.draws = draw_scheme(args.common_draws);
    if args.plus_one {
        config.p_value_rule = PValueRule::PlusOne;
    }
    let eval_start = config.resolve_eval_start(panel.n_rows())?;
    let exec = RayonExecutor::new(threads)?;

    let mut rows = Vec::new();
    for r in run_joint_tests(&panel, &taus, &config, &exec)? {
        rows.push(TestRow::from_result("joint", &r));
    }
    let causes: Vec<String> = panel.names()[1..].to_vec();
    if args.pairwise {
        for name in &causes {
            for r in run_pairwise_tests(&panel, name, &taus, &config, &exec)? {
                rows.push(TestRow::from_result(&format!("pairwise:{name}"), &r));
            }
        }
    }
    let report = TestReport {
        effect: panel.names()[0].clone(),
        causes,
        observations: panel.n_rows(),
        eval_start,
        rows,
    };
    let table = test_table(&report);
    if let Some(out) = &args.output {
        let mut manifest = RunManifest::new("test");
        manifest.inputs = vec![path_string(&args.panel.input)];
        manifest.output = Some(path_string(out));
        manifest.seed = Some(args.seed);
        manifest.taus = args.taus.clone();
        manifest.config = json!({
            "panel": args.panel.manifest_entry(),
            "n_predictions": config.n_predictions,
            "eval_start": eval_start,
            "n_bootstrap": config.n_bootstrap,
            "criterion": config.criterion,
            "truncation": config.truncation,
            "scope": config.scope,
            "p_value_rule": config.p_value_rule,
            "refit_marginals": config.refit_marginals,
            "draws": config.draws,
            "failure_cap": config.failure_cap,
            "catalog": catalog_labels(&config),
            "pairwise": args.pairwise,
        });
        write_text(out, &ResultDocument::new(manifest, &report).to_json())?;
    }
    Ok(table)
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<String> {
    let panel = read_panel(&args.panel.input, &args.panel.options())?;
    let settings = fit_settings(&args.fit);
    let model = MVineModel::fit(&panel, &settings)?;
    let mut manifest = RunManifest::new("fit");
    manifest.inputs = vec![path_string(&args.panel.input)];
    manifest.output = args.output.as_deref().map(path_string);
    manifest.config = json!({
        "panel": args.panel.manifest_entry(),
        "criterion": settings.criterion,
        "truncation": settings.truncation,
        "scope": settings.scope,
        "catalog": settings.catalog.iter().map(|f| f.label()).collect::<Vec<_>>(),
    });
    let json = ResultDocument::new(manifest, model.to_document()).to_json();
    match &args.output {
        Some(out) => {
            write_text(out, &json)?;
            Ok(format!(
                "fitted {} columns, {} observations, truncation {}; model written to {}\n",
                model.dimension(),
                panel.n_rows(),
                model.truncation(),
                out.display()
            ))
        }
        None => Ok(json),
    }
}

/// Reads a model file written by `fit`. Schema violations report the JSON
/// path of the offending value.
pub fn load_model(path: &Path) -> CliResult<MVineModel> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let doc: ResultDocument<ModelDocument> =
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: path.to_path_buf(),
            at: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    Ok(MVineModel::from_document(doc.payload)?)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<String> {
    let stream = RandomStream::new(args.seed);
    let mut manifest = RunManifest::new("simulate");
    manifest.seed = Some(args.seed);
    manifest.output = args.output.as_deref().map(path_string);
    let panel = match (&args.dgp, &args.model) {
        (Some(tag), _) => {
            manifest.config = json!({ "dgp": tag.as_str(), "length": args.t_len, "burn_in": args.burn_in });
            simulate_dgp(&DgpSpec::new(*tag).with_burn_in(args.burn_in), args.t_len, &stream)?
        }
        (None, Some(path)) => {
            manifest.inputs = vec![path_string(path)];
            manifest.config = json!({ "length": args.t_len });
            load_model(path)?.simulate_path(args.t_len, &stream)?
        }
        (None, None) => return Err(CliError::input("either --dgp or --model is required")),
    };
    let csv = panel_csv(&panel, &[format!("manifest: {}", manifest.to_line())])?;
    match &args.output {
        Some(out) => {
            write_text(out, &csv)?;
            Ok(format!("{} rows written to {}\n", panel.n_rows(), out.display()))
        }
        None => Ok(csv),
    }
}

pub fn cmd_mc(args: &McArgs, threads: Option<usize>) -> CliResult<String> {
    let taus = levels(&args.taus)?;
    let tests = TestSelection {
        joint: args.tests.contains(&TestName::Joint),
        pairwise: args.tests.contains(&TestName::Pairwise),
        f_test: args.tests.contains(&TestName::Ftest),
    };
    let mut config = TestConfig::new(taus[0]);
    config.n_bootstrap = args.bootstrap;
    config.n_predictions = args.n_predictions;
    config.seed = args.seed;
    config.criterion = args.fit.criterion.into();
    config.truncation = args.fit.truncation;
    config.draws = draw_scheme(args.common_draws);
    let settings = McSettings {
        dgps: args.dgps.clone(),
        taus,
        lengths: args.lengths.clone(),
        replications: args.replications,
        alpha: args.alpha,
        tests,
        burn_in: args.burn_in,
        config,
    };
    let exec = RayonExecutor::new(threads)?;
    let report = mc_study(&settings, &exec)?;
    let mut manifest = RunManifest::new("mc");
    manifest.seed = Some(args.seed);
    manifest.output = args.output.as_deref().map(path_string);
    manifest.taus = args.taus.clone();
    manifest.config = json!({
        "dgps": args.dgps.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
        "lengths": args.lengths,
        "replications": args.replications,
        "n_bootstrap": args.bootstrap,
        "n_predictions": args.n_predictions,
        "alpha": args.alpha,
        "tests": tests,
        "burn_in": args.burn_in,
        "criterion": settings.config.criterion,
        "truncation": settings.config.truncation,
        "scope": settings.config.scope,
        "p_value_rule": settings.config.p_value_rule,
        "draws": settings.config.draws,
        "catalog": catalog_labels(&settings.config),
    });
    if let Some(out) = &args.output {
        write_text(out, &mc_csv(&report, &manifest))?;
    }
    Ok(mc_table(&report))
}
