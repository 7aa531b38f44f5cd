//! Sign-constrained linear regression front-end.
//!
//! The model is `y_t = x_t' theta + e_t` with a parameter space that pins
//! tested coefficients to be nonnegative, restricts nuisance coefficients to
//! be nonnegative, and leaves the remaining coefficients (intercept,
//! controls) free. Because the Gaussian quasi-likelihood is exactly
//! quadratic, every estimator here is available in closed form or as a cone
//! projection in the Gram-matrix metric: the sum of squared residuals at any
//! `theta` equals its value at the least-squares solution plus the squared
//! Gram-weighted distance to that solution, so constrained least squares is
//! [`crate::qp::project_onto_cone`] with weight `S_xx` and center
//! `theta_ls`. The unconstrained least-squares estimate also plays the role
//! of the one-step estimator: a single Newton step of the quadratic
//! objective lands exactly on it from any starting point.

use crate::cone::{ConeSpec, Constraint};
use crate::cv::{
    decide, naive_cv, uniform_cv, CvInputs, CvResult, Decision, SimConfig, DEFAULT_BOUND_CAP,
};
use crate::error::{Error, Result};
use crate::limit::{GammaKind, GaussianLimit};
use crate::linalg::{Cholesky, Mat};
use crate::qp::{project_onto_cone, ProjectionResult, QuadraticProblem};

/// A regression sample: response vector and design matrix.
#[derive(Debug, Clone)]
pub struct RegressionData {
    y: Vec<f64>,
    x: Mat,
}

impl RegressionData {
    /// Builds a sample, requiring more observations than regressors (the
    /// Gram matrix cannot be invertible otherwise) and matching lengths.
    pub fn new(y: Vec<f64>, x: Mat) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "response length vs design rows",
                expected: x.rows(),
                got: y.len(),
            });
        }
        if y.len() <= x.cols() {
            return Err(Error::SingularDesign {
                context: "need more observations than regressors",
            });
        }
        Ok(RegressionData { y, x })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of regressors.
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// The response vector.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The design matrix.
    pub fn x(&self) -> &Mat {
        &self.x
    }
}

/// Which design columns are tested and which are boundary nuisance
/// coefficients; all remaining columns are free (interior) coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRoles {
    /// Columns whose coefficients are tested against zero (restricted to be
    /// nonnegative under the alternative).
    pub gamma: Vec<usize>,
    /// Columns whose coefficients are nonnegative nuisance parameters that
    /// may sit at zero.
    pub beta: Vec<usize>,
}

impl ColumnRoles {
    /// Validates the roles against a design with `dim` columns: indices in
    /// range, no column in two roles, and a non-empty tested set.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.gamma.is_empty() {
            return Err(Error::InvalidConfiguration {
                context: "tested-column set is empty".into(),
            });
        }
        let mut seen = vec![false; dim];
        for &i in self.gamma.iter().chain(&self.beta) {
            if i >= dim {
                return Err(Error::InvalidConfiguration {
                    context: format!("column index {i} out of range for {dim} columns"),
                });
            }
            if seen[i] {
                return Err(Error::InvalidConfiguration {
                    context: format!("column {i} assigned to more than one role"),
                });
            }
            seen[i] = true;
        }
        Ok(())
    }

    /// Tested columns followed by nuisance columns: the coordinate order of
    /// the limit experiment.
    pub fn selection(&self) -> Vec<usize> {
        self.gamma.iter().chain(&self.beta).copied().collect()
    }

    fn cones(&self, dim: usize) -> Result<(ConeSpec, ConeSpec)> {
        let mut null_c = vec![Constraint::Free; dim];
        let mut alt_c = vec![Constraint::Free; dim];
        for &i in &self.gamma {
            null_c[i] = Constraint::FixedZero;
            alt_c[i] = Constraint::LowerBound(0.0);
        }
        for &i in &self.beta {
            null_c[i] = Constraint::LowerBound(0.0);
            alt_c[i] = Constraint::LowerBound(0.0);
        }
        Ok((ConeSpec::new(null_c)?, ConeSpec::new(alt_c)?))
    }
}

/// Unconstrained least-squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Least-squares coefficients.
    pub theta_ls: Vec<f64>,
    /// Scaled Gram matrix `X'X / n`.
    pub s_xx: Mat,
    /// Residuals at the least-squares coefficients.
    pub residuals: Vec<f64>,
    /// Observation count.
    pub n: usize,
}

/// Ordinary least squares. Fails with [`Error::SingularDesign`] when the
/// Gram matrix does not factor.
pub fn ols(data: &RegressionData) -> Result<OlsFit> {
    let n = data.n();
    let d = data.dim();
    let nf = n as f64;
    let mut s_xx = Mat::zeros(d, d);
    let mut xy = vec![0.0; d];
    for t in 0..n {
        let row = data.x.row(t);
        for i in 0..d {
            xy[i] += row[i] * data.y[t] / nf;
            for j in i..d {
                s_xx[(i, j)] += row[i] * row[j] / nf;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            s_xx[(i, j)] = s_xx[(j, i)];
        }
    }
    let chol = Cholesky::new(&s_xx, "Gram matrix").map_err(|_| Error::SingularDesign {
        context: "Gram matrix failed to factor",
    })?;
    let theta_ls = chol.solve_vec(&xy);
    let residuals = residuals_at(data, &theta_ls);
    Ok(OlsFit { theta_ls, s_xx, residuals, n })
}

fn residuals_at(data: &RegressionData, theta: &[f64]) -> Vec<f64> {
    (0..data.n())
        .map(|t| data.y[t] - crate::linalg::dot(data.x.row(t), theta))
        .collect()
}

/// Heteroskedasticity-robust score covariance (Eicker-White):
/// `sum_t e_t^2 x_t x_t' / n` with residuals taken at `theta`.
pub fn eicker_white(data: &RegressionData, theta: &[f64]) -> Mat {
    let d = data.dim();
    let nf = data.n() as f64;
    let mut out = Mat::zeros(d, d);
    for t in 0..data.n() {
        let row = data.x.row(t);
        let e2 = {
            let e = data.y[t] - crate::linalg::dot(row, theta);
            e * e
        };
        for i in 0..d {
            for j in i..d {
                out[(i, j)] += e2 * row[i] * row[j] / nf;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

/// Constrained least squares as a cone projection of the least-squares
/// coefficients in the Gram metric.
pub fn constrained_ls(fit: &OlsFit, cone: &ConeSpec) -> Result<ProjectionResult> {
    let problem = QuadraticProblem::new(fit.s_xx.clone(), fit.theta_ls.clone())?;
    project_onto_cone(&problem, cone)
}

/// Likelihood-ratio statistic for the sign-constrained regression, with the
/// estimates it is built from.
#[derive(Debug, Clone)]
pub struct RegressionLr {
    /// The statistic `n` times the drop in Gram-weighted distance from the
    /// null fit to the alternative fit (clamped at zero against roundoff).
    pub lr: f64,
    /// Unconstrained least-squares coefficients.
    pub theta_ls: Vec<f64>,
    /// Alternative (sign-constrained) estimate.
    pub theta_hat: Vec<f64>,
    /// Null-restricted estimate (tested coefficients pinned to zero).
    pub theta_tilde: Vec<f64>,
}

/// Computes the likelihood-ratio statistic from a least-squares fit and the
/// column roles.
pub fn lr_stat_regression(fit: &OlsFit, roles: &ColumnRoles) -> Result<RegressionLr> {
    roles.validate(fit.s_xx.rows())?;
    let (null_cone, alt_cone) = roles.cones(fit.s_xx.rows())?;
    let null_proj = constrained_ls(fit, &null_cone)?;
    let alt_proj = constrained_ls(fit, &alt_cone)?;
    let raw = fit.n as f64 * (null_proj.objective - alt_proj.objective);
    if raw < -1e-10 * (1.0 + null_proj.objective.abs() * fit.n as f64) {
        return Err(Error::InternalConsistency {
            context: "null fit beat the alternative fit",
        });
    }
    Ok(RegressionLr {
        lr: raw.max(0.0),
        theta_ls: fit.theta_ls.clone(),
        theta_hat: alt_proj.minimizer,
        theta_tilde: null_proj.minimizer,
    })
}

/// Configuration for [`regression_test`].
#[derive(Debug, Clone)]
pub struct RegressionTestConfig {
    /// Test level.
    pub alpha: f64,
    /// Bracket budget; `None` uses `alpha / 10`.
    pub eta: Option<f64>,
    /// Monte Carlo settings for the simulated quantiles.
    pub sim: SimConfig,
    /// Bracket bounds at or above this value are treated as unconstrained.
    pub bound_cap: f64,
    /// Use residuals from the sign-constrained fit (instead of the
    /// unconstrained fit) in the robust score covariance.
    pub constrained_residuals: bool,
}

impl RegressionTestConfig {
    /// Conventional defaults: 5% level, `eta = alpha / 10`, default draw
    /// budget, unconstrained residuals.
    pub fn new(seed: u64) -> Self {
        RegressionTestConfig {
            alpha: 0.05,
            eta: None,
            sim: SimConfig::new(seed),
            bound_cap: DEFAULT_BOUND_CAP,
            constrained_residuals: false,
        }
    }
}

/// Everything [`regression_test`] produces.
#[derive(Debug, Clone)]
pub struct RegressionTestOutcome {
    /// The likelihood-ratio statistic.
    pub lr: f64,
    /// Uniformly valid critical value and its bracket.
    pub cv: CvResult,
    /// Decision against the uniform critical value.
    pub decision: Decision,
    /// Pointwise critical value (nuisance treated as interior).
    pub naive_cv: f64,
    /// Decision against the pointwise critical value.
    pub naive_decision: Decision,
    /// Unconstrained least-squares coefficients.
    pub theta_ls: Vec<f64>,
    /// Sign-constrained (alternative) estimate.
    pub theta_hat: Vec<f64>,
    /// Null-restricted estimate.
    pub theta_tilde: Vec<f64>,
    /// Nuisance-block estimate used for the bracket (least-squares
    /// coefficients of the nuisance columns).
    pub beta_check: Vec<f64>,
    /// Covariance of `sqrt(n)` times the nuisance-block estimate.
    pub sigma_beta_check: Mat,
    /// Curvature matrix (scaled Gram matrix).
    pub omega_hat: Mat,
    /// Robust score covariance.
    pub sigma_hat: Mat,
}

/// Runs the full sign-constrained regression test: least squares, cone
/// projections for the statistic, robust covariances, the uniformly valid
/// critical value, and the pointwise comparison.
pub fn regression_test(
    data: &RegressionData,
    roles: &ColumnRoles,
    cfg: &RegressionTestConfig,
) -> Result<RegressionTestOutcome> {
    roles.validate(data.dim())?;
    let fit = ols(data)?;
    let stat = lr_stat_regression(&fit, roles)?;

    let resid_theta =
        if cfg.constrained_residuals { &stat.theta_hat } else { &stat.theta_ls };
    let sigma_hat = eicker_white(data, resid_theta);
    let omega_hat = fit.s_xx.clone();

    // Sandwich covariance of sqrt(n) times the least-squares coefficients;
    // the nuisance bracket needs its nuisance-block submatrix.
    let gram_inv = Cholesky::new(&omega_hat, "Gram matrix")
        .map_err(|_| Error::SingularDesign { context: "Gram matrix failed to factor" })?
        .inverse();
    let sandwich = gram_inv.matmul(&sigma_hat).matmul(&gram_inv);
    let beta_check: Vec<f64> = roles.beta.iter().map(|&i| stat.theta_ls[i]).collect();
    let sigma_beta_check = sandwich.submatrix(&roles.beta, &roles.beta);

    let limit = GaussianLimit::new(&omega_hat, &sigma_hat, roles.selection())?;
    let gamma_cone = vec![GammaKind::Boundary; roles.gamma.len()];
    let mut inputs = CvInputs::new(
        data.n(),
        cfg.alpha,
        beta_check.clone(),
        sigma_beta_check.clone(),
        &limit,
        gamma_cone.clone(),
        cfg.sim,
    );
    if let Some(eta) = cfg.eta {
        inputs.eta = eta;
    }
    inputs.bound_cap = cfg.bound_cap;
    let cv = uniform_cv(&inputs)?;
    let naive = naive_cv(&limit, &gamma_cone, roles.beta.len(), cfg.alpha, &cfg.sim)?;

    Ok(RegressionTestOutcome {
        lr: stat.lr,
        decision: decide(stat.lr, cv.critical_value),
        naive_decision: decide(stat.lr, naive),
        cv,
        naive_cv: naive,
        theta_ls: stat.theta_ls,
        theta_hat: stat.theta_hat,
        theta_tilde: stat.theta_tilde,
        beta_check,
        sigma_beta_check,
        omega_hat,
        sigma_hat,
    })
}
