//! `unicv` — boundary-uniform likelihood-ratio testing from the command
//! line.
//!
//! Subcommands: `test-regression` and `test-arch` run a single hypothesis
//! test on a user CSV and emit a JSON report; `mc` reproduces the built-in
//! replication studies (or a custom JSON-configured one) as CSV; and
//! `quantile-surface` tabulates limit-law quantiles over a correlation-by-
//! bound grid.
//!
//! Exit codes: 0 on success regardless of the test decision, 2 on usage,
//! I/O, or parse failures, 3 on numerical or library failures (the error
//! message echoes the seed so the case can be replayed).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use unicv::arch::{arch_test, ArchData, ArchRoles, ArchTestConfig};
use unicv::limit::quantile_surface;
use unicv::regression::{regression_test, ColumnRoles, RegressionData, RegressionTestConfig};

use unicv_cli::data_io;
use unicv_cli::dgp::DgpSpec;
use unicv_cli::report::{RunManifest, SeedInfo, TestReport, Timings};
use unicv_cli::study::{run_study, CellOutcome, CellSpec, StudySettings};
use unicv_cli::tables;

#[derive(Parser)]
#[command(
    name = "unicv",
    version,
    about = "Likelihood-ratio tests with uniformly valid critical values when \
             nuisance parameters may lie on or near a boundary"
)]
struct Cli {
    /// Cap on worker threads for parallel sections (0 = all cores). Never
    /// affects results, only wall time.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test sign-constrained regression coefficients from a CSV file.
    TestRegression(TestRegressionArgs),
    /// Test variance loadings in a conditional-volatility model from a CSV
    /// file.
    TestArch(TestArchArgs),
    /// Run a replication study: a built-in table or a custom JSON design.
    Mc(McArgs),
    /// Tabulate limit-law quantiles over a correlation-by-bound grid.
    QuantileSurface(SurfaceArgs),
}

#[derive(Args)]
struct TestRegressionArgs {
    /// Input CSV: header row; first column is the response, every other
    /// column a regressor.
    #[arg(long)]
    data: PathBuf,
    /// Zero-based regressor indices under test (zero against positive).
    #[arg(long, required = true, value_delimiter = ',')]
    gamma: Vec<usize>,
    /// Zero-based regressor indices of nonnegative nuisance coefficients
    /// that may sit at zero. Unlisted columns are unconstrained controls.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<usize>,
    /// Test level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bracket budget, strictly between 0 and alpha (default: alpha / 10).
    #[arg(long)]
    eta: Option<f64>,
    /// Monte Carlo draws per simulated quantile.
    #[arg(long, default_value_t = unicv::cv::DEFAULT_DRAWS)]
    draws: usize,
    /// Master seed; the run is bit-reproducible given it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use residuals from the sign-constrained fit in the robust score
    /// covariance (default: unconstrained residuals).
    #[arg(long)]
    constrained_residuals: bool,
    /// Also report the pointwise (boundary-quantile) comparison. This is
    /// always on; the flag is accepted for explicitness.
    #[arg(long)]
    naive: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArchArgs {
    /// Input CSV: header row; first column is the series, every other
    /// column a variance covariate. A one-column file means no covariates.
    #[arg(long)]
    data: PathBuf,
    /// Number of lagged squared-response terms in the variance.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Zero-based indices under test among the variance coefficients
    /// (covariates in file order, then the lag coefficients).
    #[arg(long, required = true, value_delimiter = ',')]
    gamma: Vec<usize>,
    /// Zero-based indices of boundary nuisance coefficients (same
    /// numbering).
    #[arg(long, value_delimiter = ',')]
    beta: Vec<usize>,
    /// Test level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bracket budget, strictly between 0 and alpha (default: alpha / 10).
    #[arg(long)]
    eta: Option<f64>,
    /// Monte Carlo draws per simulated quantile.
    #[arg(long, default_value_t = unicv::cv::DEFAULT_DRAWS)]
    draws: usize,
    /// Master seed; the run is bit-reproducible given it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the pointwise (boundary-quantile) comparison. This is
    /// always on; the flag is accepted for explicitness.
    #[arg(long)]
    naive: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["table", "config"])))]
struct McArgs {
    /// Built-in study id: t1, t2, t3, t4 (regression), t5, t6
    /// (volatility), t8 (copula covariates).
    table: Option<String>,
    /// JSON file describing a custom design (fields: family plus its
    /// parameters, optional master_seed, replications, alpha, eta, draws).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replications per cell (default: 10000, or the config file's value).
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed (default: 0, or the config file's value).
    #[arg(long)]
    seed: Option<u64>,
    /// Test level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Bracket budget, strictly between 0 and alpha (default: alpha / 10).
    #[arg(long)]
    eta: Option<f64>,
    /// Monte Carlo draws per simulated quantile.
    #[arg(long)]
    draws: Option<usize>,
    /// Keep only cells with these sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Keep only cells with these correlation values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho: Vec<f64>,
    /// Keep only cells with these true tested loadings.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Keep only cells with these true nuisance loadings.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    /// Write the result CSV here instead of stdout (also writes
    /// `<out>.manifest.json`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the run manifest to this path.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Correlation values for the tested-against-nuisance score pair.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-0.95,-0.75,-0.5,0,0.5,0.75,0.95"
    )]
    rho: Vec<f64>,
    /// Smallest nuisance bound.
    #[arg(long, default_value_t = 0.0)]
    b_min: f64,
    /// Largest nuisance bound.
    #[arg(long, default_value_t = 5.0)]
    b_max: f64,
    /// Bound step.
    #[arg(long, default_value_t = 0.1)]
    b_step: f64,
    /// Quantile level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Monte Carlo draws per grid point.
    #[arg(long, default_value_t = unicv::cv::DEFAULT_DRAWS)]
    draws: usize,
    /// Master seed; the run is bit-reproducible given it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Custom single-design study configuration.
#[derive(serde::Serialize, serde::Deserialize)]
struct McConfig {
    #[serde(flatten)]
    dgp: DgpSpec,
    #[serde(default)]
    master_seed: Option<u64>,
    #[serde(default)]
    replications: Option<usize>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    draws: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Capping workers must never change results, only wall time; the
        // study aggregation is an order-independent sum of counts.
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()
        {
            eprintln!("error: configuring {} worker threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Maps an error chain to the documented exit codes: numerical or library
/// failures exit 3, everything else (usage, I/O, parsing) exits 2.
fn classify(err: &anyhow::Error) -> u8 {
    if err.chain().any(|c| c.downcast_ref::<unicv::Error>().is_some()) {
        3
    } else {
        2
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TestRegression(args) => cmd_test_regression(args),
        Command::TestArch(args) => cmd_test_arch(args),
        Command::Mc(args) => cmd_mc(args),
        Command::QuantileSurface(args) => cmd_quantile_surface(args),
    }
}

/// Checks role indices against the regressor columns, naming the columns
/// in the error so off-by-one mistakes are easy to spot.
fn check_role_indices(
    indices: &[usize],
    flag: &str,
    regressor_names: &[String],
    extra_targets: usize,
) -> Result<()> {
    let limit = regressor_names.len() + extra_targets;
    for &i in indices {
        if i >= limit {
            bail!(
                "--{flag} index {i} out of range: the file has {} regressor column(s) ({}){}",
                regressor_names.len(),
                regressor_names.join(", "),
                if extra_targets > 0 {
                    format!(" plus {extra_targets} lag coefficient(s)")
                } else {
                    String::new()
                }
            );
        }
    }
    Ok(())
}

/// Writes text to a file or stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to stdout")?;
            stdout.flush().context("flushing stdout")
        }
    }
}

fn report_json(report: &TestReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report).context("serializing report")?;
    text.push('\n');
    Ok(text)
}

fn cmd_test_regression(args: TestRegressionArgs) -> Result<()> {
    let start = Instant::now();
    let table = data_io::read_numeric_csv(&args.data)?;
    if table.regressors.cols() == 0 {
        bail!("{}: no regressor columns after the response", args.data.display());
    }
    let regressor_names = &table.header[1..];
    check_role_indices(&args.gamma, "gamma", regressor_names, 0)?;
    check_role_indices(&args.beta, "beta", regressor_names, 0)?;
    let data = RegressionData::new(table.response, table.regressors)
        .with_context(|| format!("invalid dataset (seed {})", args.seed))?;
    let roles = ColumnRoles { gamma: args.gamma.clone(), beta: args.beta.clone() };

    let mut cfg = RegressionTestConfig::new(args.seed);
    cfg.alpha = args.alpha;
    cfg.eta = args.eta;
    cfg.sim = cfg.sim.with_draws(args.draws);
    cfg.constrained_residuals = args.constrained_residuals;

    let fit_start = Instant::now();
    let outcome = regression_test(&data, &roles, &cfg)
        .with_context(|| format!("regression test failed (seed {})", args.seed))?;
    let fit_ms = fit_start.elapsed().as_secs_f64() * 1e3;

    let report = TestReport::from_regression(
        &outcome,
        args.alpha,
        SeedInfo { master_seed: args.seed, draws: args.draws },
        Timings { total_ms: start.elapsed().as_secs_f64() * 1e3, fit_ms },
    );
    emit(&args.out, &report_json(&report)?)
}

fn cmd_test_arch(args: TestArchArgs) -> Result<()> {
    let start = Instant::now();
    let table = data_io::read_numeric_csv(&args.data)?;
    let regressor_names = &table.header[1..];
    check_role_indices(&args.gamma, "gamma", regressor_names, args.q)?;
    check_role_indices(&args.beta, "beta", regressor_names, args.q)?;
    let data = ArchData::with_mean_presample(table.response, table.regressors, args.q)
        .with_context(|| format!("invalid dataset (seed {})", args.seed))?;
    let roles = ArchRoles { gamma: args.gamma.clone(), beta: args.beta.clone() };

    let mut cfg = ArchTestConfig::new(args.seed);
    cfg.alpha = args.alpha;
    cfg.eta = args.eta;
    cfg.sim = cfg.sim.with_draws(args.draws);

    let fit_start = Instant::now();
    let outcome = arch_test(&data, &roles, &cfg)
        .with_context(|| format!("volatility test failed (seed {})", args.seed))?;
    let fit_ms = fit_start.elapsed().as_secs_f64() * 1e3;

    let report = TestReport::from_arch(
        &outcome,
        &roles,
        args.alpha,
        SeedInfo { master_seed: args.seed, draws: args.draws },
        Timings { total_ms: start.elapsed().as_secs_f64() * 1e3, fit_ms },
    );
    emit(&args.out, &report_json(&report)?)
}

/// Renders study outcomes as the long-format result CSV.
fn results_csv(outcomes: &[CellOutcome]) -> String {
    let mut text = String::from("family,n,rho,gamma,beta,method,rejection_frequency,se,reps\n");
    for oc in outcomes {
        let (family, n, rho, gamma, beta) = tables::cell_csv_fields(&oc.cell.dgp);
        for (method, stats) in [("naive_lr", &oc.naive), ("lr_uniform", &oc.uniform)] {
            text.push_str(&format!(
                "{family},{n},{rho},{gamma},{beta},{method},{:.6},{:.6},{}\n",
                stats.frequency(),
                stats.se(),
                stats.reps
            ));
        }
    }
    text
}

fn cmd_mc(args: McArgs) -> Result<()> {
    let start = Instant::now();

    let mut master_seed = args.seed.unwrap_or(0);
    let mut settings = StudySettings::default();
    let mut cells: Vec<CellSpec>;
    let config_echo: serde_json::Value;

    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let config: McConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        config.dgp.validate()?;
        let reps = args.reps.or(config.replications).unwrap_or(tables::DEFAULT_REPS);
        master_seed = args.seed.or(config.master_seed).unwrap_or(0);
        settings.alpha = args.alpha.or(config.alpha).unwrap_or(0.05);
        settings.eta = args.eta.or(config.eta);
        settings.draws = args.draws.or(config.draws).unwrap_or(unicv::cv::DEFAULT_DRAWS);
        cells = vec![CellSpec { id: 9_000_000, dgp: config.dgp, reps }];
        config_echo = serde_json::json!({
            "source": "config",
            "path": path.display().to_string(),
            "cells": cells,
            "alpha": settings.alpha,
            "eta": settings.eta,
            "draws": settings.draws,
        });
    } else {
        let table = args.table.as_deref().expect("clap group guarantees a source");
        let reps = args.reps.unwrap_or(tables::DEFAULT_REPS);
        if let Some(a) = args.alpha {
            settings.alpha = a;
        }
        settings.eta = args.eta;
        if let Some(d) = args.draws {
            settings.draws = d;
        }
        cells = tables::table_cells(table, reps)?;
        cells = tables::filter_cells(cells, &args.n, &args.rho, &args.gamma, &args.beta);
        config_echo = serde_json::json!({
            "source": "table",
            "table": table,
            "cells": cells,
            "alpha": settings.alpha,
            "eta": settings.eta,
            "draws": settings.draws,
        });
    }

    if cells.is_empty() {
        bail!("no cells remain after filtering");
    }
    for cell in &cells {
        if cell.reps == 0 {
            bail!("cell {} has zero replications", cell.id);
        }
    }

    let outcomes = run_study(&cells, master_seed, &settings)?;
    let csv_text = results_csv(&outcomes);
    emit(&args.out, &csv_text)?;

    let manifest_path: Option<PathBuf> = args.manifest.clone().or_else(|| {
        args.out.as_ref().map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        let manifest = RunManifest::new(
            render_command_line(),
            config_echo,
            master_seed,
            start.elapsed().as_secs_f64() * 1e3,
        );
        let mut text =
            serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        text.push('\n');
        std::fs::write(&path, text)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_quantile_surface(args: SurfaceArgs) -> Result<()> {
    if args.b_step.is_nan() || args.b_step <= 0.0 {
        bail!("--b-step must be positive, got {}", args.b_step);
    }
    let bs = float_grid(args.b_min, args.b_max, args.b_step);
    let mut text = String::from("rho,b,quantile\n");
    if !args.rho.is_empty() && !bs.is_empty() {
        let points = quantile_surface(&args.rho, &bs, args.level, args.draws, args.seed)
            .with_context(|| format!("quantile surface failed (seed {})", args.seed))?;
        for p in points {
            text.push_str(&format!(
                "{},{},{:.6}\n",
                tables::fmt_param(p.rho),
                tables::fmt_param(p.b),
                p.quantile
            ));
        }
    }
    emit(&args.out, &text)
}

/// Evenly spaced grid from `min` to `max` inclusive (empty if `min > max`).
fn float_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    if min > max {
        return Vec::new();
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| min + i as f64 * step).collect()
}

/// The command line as invoked, for the manifest.
fn render_command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}
