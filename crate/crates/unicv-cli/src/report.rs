//! Machine-readable output schemas: per-test JSON reports and run
//! manifests.

use serde::{Deserialize, Serialize};
use unicv::arch::{ArchRoles, ArchTestOutcome};
use unicv::cv::Decision;
use unicv::linalg::Mat;
use unicv::regression::RegressionTestOutcome;

/// Version stamp for every emitted JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Converts a matrix to row-major nested vectors for serialization.
pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn decision_str(d: Decision) -> String {
    match d {
        Decision::Reject => "reject".to_string(),
        Decision::FailToReject => "fail_to_reject".to_string(),
    }
}

/// Point estimates reported by a test run. Optional fields appear only for
/// the model that produces them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimates {
    /// Constrained (alternative) estimate.
    pub theta_hat: Vec<f64>,
    /// Null-restricted estimate.
    pub theta_tilde: Vec<f64>,
    /// Nuisance-block estimate the bracket is centred on.
    pub beta_check: Vec<f64>,
    /// Unconstrained least-squares estimate (regression only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_ls: Option<Vec<f64>>,
    /// One-step estimator (volatility model only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_check: Option<Vec<f64>>,
    /// Excess-kurtosis estimate (volatility model only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_hat: Option<f64>,
}

/// Covariance matrices behind the critical value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceSummary {
    /// Curvature matrix estimate.
    pub omega_hat: Vec<Vec<f64>>,
    /// Score covariance estimate.
    pub sigma_hat: Vec<Vec<f64>>,
    /// Covariance of the scaled nuisance-block estimator.
    pub sigma_beta_check: Vec<Vec<f64>>,
    /// Correlation matrix used for the bracket quantile, when a nuisance
    /// block is present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_used: Option<Vec<Vec<f64>>>,
    /// Volatility model only: whether the curvature estimate fell back to
    /// the expected information because the observed curvature was not
    /// positive definite at the fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_information: Option<bool>,
}

/// Seeds and draw budgets, sufficient to replay the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedInfo {
    /// Master seed every substream derives from.
    pub master_seed: u64,
    /// Monte Carlo draws per simulated quantile.
    pub draws: usize,
}

/// Wall-clock timings in milliseconds. Excluded from reproducibility
/// comparisons.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Total command time.
    pub total_ms: f64,
    /// Time spent fitting the model.
    pub fit_ms: f64,
}

/// Full JSON report for a single hypothesis test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    /// Output schema version.
    pub schema_version: u32,
    /// `"regression"` or `"arch"`.
    pub model: String,
    /// Likelihood-ratio statistic.
    pub lr_stat: f64,
    /// Uniformly valid critical value.
    pub critical_value: f64,
    /// Pointwise critical value the comparison column uses.
    pub naive_cv: f64,
    /// Decision against the uniform critical value.
    pub decision: String,
    /// Decision against the pointwise critical value.
    pub naive_decision: String,
    /// Test level.
    pub alpha: f64,
    /// Bracket budget actually used.
    pub eta: f64,
    /// Quantile level of the limit statistic, `1 - alpha + eta`.
    pub level_used: f64,
    /// Lower bracket half-widths (floored at zero).
    pub b_lower: Vec<f64>,
    /// Upper bracket half-widths (floored at zero).
    pub b_upper: Vec<f64>,
    /// Simulated max-abs quantile behind the bracket, when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max_abs: Option<f64>,
    /// Number of bracket bounds treated as unconstrained by the cap.
    pub capped_bounds: usize,
    /// Point estimates.
    pub estimates: Estimates,
    /// Covariance matrices.
    pub covariances: CovarianceSummary,
    /// Seeds and draw budgets.
    pub seeds: SeedInfo,
    /// Wall-clock timings.
    pub timings: Timings,
}

impl TestReport {
    /// Builds the report for a regression-test outcome.
    pub fn from_regression(
        out: &RegressionTestOutcome,
        alpha: f64,
        seeds: SeedInfo,
        timings: Timings,
    ) -> Self {
        TestReport {
            schema_version: SCHEMA_VERSION,
            model: "regression".to_string(),
            lr_stat: out.lr,
            critical_value: out.cv.critical_value,
            naive_cv: out.naive_cv,
            decision: decision_str(out.decision),
            naive_decision: decision_str(out.naive_decision),
            alpha,
            eta: out.cv.diagnostics.eta,
            level_used: out.cv.level_used,
            b_lower: out.cv.b_lower.clone(),
            b_upper: out.cv.b_upper.clone(),
            q_max_abs: out.cv.q_max_abs,
            capped_bounds: out.cv.diagnostics.capped_bounds,
            estimates: Estimates {
                theta_hat: out.theta_hat.clone(),
                theta_tilde: out.theta_tilde.clone(),
                beta_check: out.beta_check.clone(),
                theta_ls: Some(out.theta_ls.clone()),
                theta_check: None,
                kappa_hat: None,
            },
            covariances: CovarianceSummary {
                omega_hat: mat_rows(&out.omega_hat),
                sigma_hat: mat_rows(&out.sigma_hat),
                sigma_beta_check: mat_rows(&out.sigma_beta_check),
                correlation_used: out.cv.correlation_used.as_ref().map(mat_rows),
                expected_information: None,
            },
            seeds,
            timings,
        }
    }

    /// Builds the report for a volatility-test outcome.
    pub fn from_arch(
        out: &ArchTestOutcome,
        roles: &ArchRoles,
        alpha: f64,
        seeds: SeedInfo,
        timings: Timings,
    ) -> Self {
        let beta_check: Vec<f64> =
            roles.beta.iter().map(|&i| out.fit.theta_check[i]).collect();
        TestReport {
            schema_version: SCHEMA_VERSION,
            model: "arch".to_string(),
            lr_stat: out.lr,
            critical_value: out.cv.critical_value,
            naive_cv: out.naive_cv,
            decision: decision_str(out.decision),
            naive_decision: decision_str(out.naive_decision),
            alpha,
            eta: out.cv.diagnostics.eta,
            level_used: out.cv.level_used,
            b_lower: out.cv.b_lower.clone(),
            b_upper: out.cv.b_upper.clone(),
            q_max_abs: out.cv.q_max_abs,
            capped_bounds: out.cv.diagnostics.capped_bounds,
            estimates: Estimates {
                theta_hat: out.fit.theta_hat.clone(),
                theta_tilde: out.fit.theta_tilde.clone(),
                beta_check,
                theta_ls: None,
                theta_check: Some(out.fit.theta_check.clone()),
                kappa_hat: Some(out.fit.kappa_hat),
            },
            covariances: CovarianceSummary {
                omega_hat: mat_rows(&out.fit.omega_hat),
                sigma_hat: mat_rows(&out.fit.sigma_hat),
                sigma_beta_check: mat_rows(&out.fit.sigma_beta_check),
                correlation_used: out.cv.correlation_used.as_ref().map(mat_rows),
                expected_information: Some(out.fit.expected_information),
            },
            seeds,
            timings,
        }
    }
}

/// Top-level record of one CLI invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Output schema version.
    pub schema_version: u32,
    /// The command line as invoked.
    pub command: String,
    /// Full effective configuration, echoed back.
    pub config: serde_json::Value,
    /// Master seed for the run.
    pub master_seed: u64,
    /// Version of the underlying library.
    pub library_version: String,
    /// Total wall time in milliseconds.
    pub wall_time_ms: f64,
}

impl RunManifest {
    /// Builds a manifest from the invocation pieces.
    pub fn new(command: String, config: serde_json::Value, master_seed: u64, wall_time_ms: f64) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            master_seed,
            library_version: unicv::VERSION.to_string(),
            wall_time_ms,
        }
    }
}
