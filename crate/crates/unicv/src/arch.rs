//! ARCH-X volatility model front-end.
//!
//! The observed series follows `y_t = sigma_t(theta) * eps_t` with
//! conditional variance linear in the regressors,
//! `sigma_t^2 = theta' F_{t-1}`, where `F_{t-1}` stacks nonnegative
//! exogenous covariates, lagged squared responses, and a constant (the
//! intercept is always the last coordinate). All variance loadings are
//! nonnegative, so tested covariate coefficients and nuisance coefficients
//! live on the boundary of the parameter space when their true values are
//! zero -- exactly the situation the critical-value engine exists for.
//!
//! Estimation maximizes the Gaussian quasi-log-likelihood over a box:
//! loadings in `[0, upper]`, intercept in `[lower, upper]` with a strictly
//! positive floor so every box point yields positive variances. The
//! parameter space is a box only; covariance stationarity of the implied
//! process is not enforced (the boxes are wide enough that the optimizer,
//! not the box edge, determines the fit in practice).

use crate::cv::{
    decide, naive_cv, uniform_cv, CvInputs, CvResult, Decision, SimConfig, DEFAULT_BOUND_CAP,
};
use crate::error::{Error, Result};
use crate::limit::{GammaKind, GaussianLimit};
use crate::linalg::{dot, lu_inverse, lu_solve, Cholesky, Mat};

/// Optimizer iteration budget per start.
const QMLE_MAX_ITER: usize = 500;
/// Projected-score target the optimizer works toward.
const QMLE_TARGET: f64 = 1e-8;
/// Projected-score level at which a run still counts as converged.
const QMLE_ACCEPT: f64 = 1e-6;
/// Relative slack allowed before a negative likelihood-ratio statistic is
/// treated as an internal error instead of roundoff.
const LR_SLACK: f64 = 1e-6;

/// An ARCH-X sample: responses, covariate matrix, lag order, and the
/// presample squared responses standing in for lags before the sample
/// starts.
#[derive(Debug, Clone)]
pub struct ArchData {
    y: Vec<f64>,
    x: Mat,
    q: usize,
    presample_y2: Vec<f64>,
}

impl ArchData {
    /// Builds a sample. Row `t` of `x` must hold the covariates dated
    /// `t - 1` (already shifted so they are known when `y_t` is realized),
    /// and every covariate must be nonnegative (they enter a variance).
    /// `presample_y2[k]` stands in for the squared response `k + 1` periods
    /// before the sample.
    pub fn new(y: Vec<f64>, x: Mat, q: usize, presample_y2: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if x.rows() != n {
            return Err(Error::DimensionMismatch {
                context: "covariate rows vs response length",
                expected: n,
                got: x.rows(),
            });
        }
        if presample_y2.len() != q {
            return Err(Error::DimensionMismatch {
                context: "presample length vs lag order",
                expected: q,
                got: presample_y2.len(),
            });
        }
        let m = x.cols() + q + 1;
        if n <= m {
            return Err(Error::InvalidConfiguration {
                context: format!("need more than {m} observations, got {n}"),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfiguration {
                context: "response contains a non-finite value".into(),
            });
        }
        for t in 0..n {
            for j in 0..x.cols() {
                let v = x[(t, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidConfiguration {
                        context: format!("covariate ({t}, {j}) is {v}; must be nonnegative"),
                    });
                }
            }
        }
        if presample_y2.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfiguration {
                context: "presample squared responses must be nonnegative".into(),
            });
        }
        Ok(ArchData { y, x, q, presample_y2 })
    }

    /// Builds a sample with the standard real-data presample convention:
    /// every missing lag is replaced by the sample mean of the squared
    /// responses.
    pub fn with_mean_presample(y: Vec<f64>, x: Mat, q: usize) -> Result<Self> {
        let mean_y2 = if y.is_empty() {
            0.0
        } else {
            y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64
        };
        ArchData::new(y, x, q, vec![mean_y2; q])
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of exogenous covariates.
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Number of lagged squared-response terms.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Total parameter dimension: covariates + lags + intercept.
    pub fn dim(&self) -> usize {
        self.p() + self.q + 1
    }

    /// Index of the intercept coordinate (always last).
    pub fn intercept_index(&self) -> usize {
        self.dim() - 1
    }

    /// Sample mean of the squared responses.
    pub fn mean_y2(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>() / self.n() as f64
    }

    /// The response series.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The full variance-regressor matrix: row `t` holds the covariates,
    /// the `q` lagged squared responses (presample-filled at the start),
    /// and a trailing one.
    pub fn regressor_matrix(&self) -> Mat {
        self.design().f
    }

    fn design(&self) -> Design {
        let n = self.n();
        let p = self.p();
        let m = self.dim();
        let y2: Vec<f64> = self.y.iter().map(|v| v * v).collect();
        let mut f = Mat::zeros(n, m);
        for t in 0..n {
            for j in 0..p {
                f[(t, j)] = self.x[(t, j)];
            }
            for j in 1..=self.q {
                f[(t, p + j - 1)] = if t >= j { y2[t - j] } else { self.presample_y2[j - t - 1] };
            }
            f[(t, m - 1)] = 1.0;
        }
        Design { f, y2 }
    }
}

/// Precomputed variance regressors and squared responses.
struct Design {
    f: Mat,
    y2: Vec<f64>,
}

impl Design {
    fn n(&self) -> usize {
        self.f.rows()
    }

    fn dim(&self) -> usize {
        self.f.cols()
    }

    /// Conditional variances at `theta`; fails on the first non-positive one.
    fn variances(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "parameter vs regressor dimension",
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n());
        for t in 0..self.n() {
            let s2 = dot(self.f.row(t), theta);
            if s2.is_nan() || s2 <= 0.0 {
                return Err(Error::InfeasibleTheta { index: t, value: s2 });
            }
            out.push(s2);
        }
        Ok(out)
    }

    fn loglik_from(&self, s2: &[f64]) -> f64 {
        s2.iter().zip(&self.y2).map(|(&v, &y2)| -0.5 * (v.ln() + y2 / v)).sum()
    }

    fn score_from(&self, s2: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut g = vec![0.0; m];
        for (t, &s2t) in s2.iter().enumerate() {
            let w = 0.5 * (self.y2[t] / s2t - 1.0) / s2t;
            let row = self.f.row(t);
            for i in 0..m {
                g[i] += w * row[i];
            }
        }
        g
    }

    fn hessian_from(&self, s2: &[f64]) -> Mat {
        let m = self.dim();
        let mut h = Mat::zeros(m, m);
        for (t, &v) in s2.iter().enumerate() {
            let w = -0.5 * (2.0 * self.y2[t] / (v * v * v) - 1.0 / (v * v));
            let row = self.f.row(t);
            for i in 0..m {
                for j in i..m {
                    h[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        h
    }

    /// Expected-information matrix `sum_t F_t F_t' / (2 sigma_t^4)`, the
    /// always-positive-definite curvature proxy used for ascent directions.
    fn information_from(&self, s2: &[f64]) -> Mat {
        let m = self.dim();
        let mut b = Mat::zeros(m, m);
        for (t, &s2t) in s2.iter().enumerate() {
            let w = 0.5 / (s2t * s2t);
            let row = self.f.row(t);
            for i in 0..m {
                for j in i..m {
                    b[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                b[(i, j)] = b[(j, i)];
            }
        }
        b
    }
}

/// Gaussian quasi-log-likelihood (sum over observations, constants
/// dropped): `-(1/2) sum_t [ln sigma_t^2 + y_t^2 / sigma_t^2]`.
pub fn arch_loglik(data: &ArchData, theta: &[f64]) -> Result<f64> {
    let design = data.design();
    let s2 = design.variances(theta)?;
    Ok(design.loglik_from(&s2))
}

/// Analytic score of [`arch_loglik`]:
/// `sum_t (eps_t^2 - 1) F_{t-1} / (2 sigma_t^2)` with `eps_t^2 = y_t^2 /
/// sigma_t^2`.
pub fn arch_score(data: &ArchData, theta: &[f64]) -> Result<Vec<f64>> {
    let design = data.design();
    let s2 = design.variances(theta)?;
    Ok(design.score_from(&s2))
}

/// Analytic Hessian of [`arch_loglik`]:
/// `-(1/2) sum_t [2 y_t^2 / sigma_t^6 - 1 / sigma_t^4] F_i F_j`.
pub fn arch_hessian(data: &ArchData, theta: &[f64]) -> Result<Mat> {
    let design = data.design();
    let s2 = design.variances(theta)?;
    Ok(design.hessian_from(&s2))
}

/// Box constraints for the QMLE: elementwise `lower <= theta <= upper`,
/// with a strictly positive intercept floor (last coordinate) so every
/// point of the box produces positive variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchParamSpace {
    /// Elementwise lower bounds (zeros except the intercept floor).
    pub lower: Vec<f64>,
    /// Elementwise upper bounds.
    pub upper: Vec<f64>,
}

impl ArchParamSpace {
    /// Validates and builds a box. All lower bounds must be nonnegative,
    /// below their uppers, and the intercept floor strictly positive.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "box lower vs upper lengths",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (&lo, &up)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !up.is_finite() || lo < 0.0 || lo > up {
                return Err(Error::InvalidConfiguration {
                    context: format!("box bounds [{lo}, {up}] at coordinate {i} are invalid"),
                });
            }
        }
        let last = lower.len() - 1;
        if lower[last] <= 0.0 {
            return Err(Error::InvalidConfiguration {
                context: "intercept lower bound must be strictly positive".into(),
            });
        }
        Ok(ArchParamSpace { lower, upper })
    }

    /// Default box for a sample: loadings in `[0, 1000]`, intercept between
    /// `1e-8` and `1000` times the mean squared response.
    pub fn defaults(data: &ArchData) -> Self {
        let m = data.dim();
        let scale = data.mean_y2().max(f64::MIN_POSITIVE);
        let mut lower = vec![0.0; m];
        let mut upper = vec![1e3; m];
        lower[m - 1] = 1e-8 * scale;
        upper[m - 1] = 1e3 * scale;
        ArchParamSpace { lower, upper }
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn clip(&self, theta: &mut [f64]) {
        for (i, v) in theta.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Which regressor coordinates are tested and which are boundary nuisance
/// loadings. The intercept is never assignable; unassigned loadings are
/// treated as known-interior (unconstrained in the limit experiment).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchRoles {
    /// Tested coordinates (zero under the null, nonnegative under the
    /// alternative).
    pub gamma: Vec<usize>,
    /// Boundary-nuisance coordinates.
    pub beta: Vec<usize>,
}

impl ArchRoles {
    /// Validates the roles for a sample with `dim` parameters (so
    /// assignable indices are `0..dim - 1`, excluding the intercept).
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.gamma.is_empty() {
            return Err(Error::InvalidConfiguration {
                context: "tested-covariate set is empty".into(),
            });
        }
        let mut seen = vec![false; dim];
        for &i in self.gamma.iter().chain(&self.beta) {
            if i + 1 >= dim {
                return Err(Error::InvalidConfiguration {
                    context: format!(
                        "coordinate {i} is not assignable (intercept and out-of-range excluded)"
                    ),
                });
            }
            if seen[i] {
                return Err(Error::InvalidConfiguration {
                    context: format!("coordinate {i} assigned to more than one role"),
                });
            }
            seen[i] = true;
        }
        Ok(())
    }

    /// Tested coordinates followed by nuisance coordinates.
    pub fn selection(&self) -> Vec<usize> {
        self.gamma.iter().chain(&self.beta).copied().collect()
    }
}

/// One quasi-maximum-likelihood run (best of the deterministic starts).
#[derive(Debug, Clone)]
pub struct QmleFit {
    /// The maximizing parameter.
    pub theta: Vec<f64>,
    /// Log-likelihood at the maximum.
    pub loglik: f64,
    /// Iterations used by the winning start.
    pub iterations: usize,
    /// Scaled projected-score norm at the maximum (per observation).
    pub kkt_residual: f64,
}

/// Maximizes the quasi-log-likelihood over the box by projected Fisher
/// scoring with backtracking, from five deterministic starts; coordinates
/// listed in `fixed_zero` are pinned to zero (the restricted fit).
///
/// Fails with [`Error::NonConvergence`] when no start drives the projected
/// score below tolerance.
pub fn arch_qmle(
    data: &ArchData,
    space: &ArchParamSpace,
    fixed_zero: &[usize],
) -> Result<QmleFit> {
    qmle_multi(&data.design(), space, fixed_zero, None)
}

fn default_starts(design: &Design, space: &ArchParamSpace) -> Vec<Vec<f64>> {
    let m = design.dim();
    let mean_y2 = design.y2.iter().sum::<f64>() / design.n() as f64;
    // Intercept fractions of the mean squared response paired with flat
    // loading guesses; diverse enough to straddle the usual basins.
    let plans: [(f64, f64); 5] =
        [(0.5, 0.05), (0.9, 0.01), (0.25, 0.2), (0.75, 0.1), (0.1, 0.3)];
    plans
        .iter()
        .map(|&(frac, load)| {
            let mut theta = vec![load; m];
            theta[m - 1] = frac * mean_y2;
            space.clip(&mut theta);
            theta
        })
        .collect()
}

fn qmle_multi(
    design: &Design,
    space: &ArchParamSpace,
    fixed_zero: &[usize],
    extra_start: Option<&[f64]>,
) -> Result<QmleFit> {
    let m = design.dim();
    if space.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "box vs parameter dimension",
            expected: m,
            got: space.dim(),
        });
    }
    let mut fixed = vec![false; m];
    for &i in fixed_zero {
        if i >= m {
            return Err(Error::DimensionMismatch {
                context: "pinned coordinate out of range",
                expected: m,
                got: i,
            });
        }
        if space.lower[i] > 0.0 {
            return Err(Error::InvalidConfiguration {
                context: format!("coordinate {i} cannot be pinned to zero: its floor is positive"),
            });
        }
        fixed[i] = true;
    }

    let mut starts = default_starts(design, space);
    if let Some(extra) = extra_start {
        let mut s = extra.to_vec();
        space.clip(&mut s);
        starts.push(s);
    }
    for s in &mut starts {
        for i in 0..m {
            if fixed[i] {
                s[i] = 0.0;
            }
        }
    }

    let mut best: Option<QmleFit> = None;
    let mut best_residual = f64::INFINITY;
    let mut best_iterations = 0;
    for start in starts {
        let run = qmle_single(design, space, &fixed, start);
        best_residual = best_residual.min(run.kkt_residual);
        best_iterations = best_iterations.max(run.iterations);
        if run.kkt_residual <= QMLE_ACCEPT {
            let better = best.as_ref().map_or(true, |b| run.loglik > b.loglik);
            if better {
                best = Some(run);
            }
        }
    }
    best.ok_or(Error::NonConvergence {
        iterations: best_iterations,
        gradient_norm: best_residual,
    })
}

/// Projected ascent from one start: a full Newton step on the working face
/// when the observed curvature there is positive definite, otherwise
/// expected-information scoring with an escalating ridge, otherwise a
/// projected gradient step. Always returns the best point reached; the
/// caller decides whether its residual is acceptable.
fn qmle_single(
    design: &Design,
    space: &ArchParamSpace,
    fixed: &[bool],
    start: Vec<f64>,
) -> QmleFit {
    let m = design.dim();
    let n = design.n() as f64;
    let free_idx: Vec<usize> = (0..m).filter(|&i| !fixed[i]).collect();
    let mut theta = start;
    let mut s2 = design.variances(&theta).expect("box points have positive variances");
    let mut loglik = design.loglik_from(&s2);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    let projected_residual = |theta: &[f64], g: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for &i in &free_idx {
            let at_lower = theta[i] <= space.lower[i] + 1e-12 * (1.0 + space.lower[i].abs());
            let at_upper = theta[i] >= space.upper[i] - 1e-12 * (1.0 + space.upper[i].abs());
            let pg = if at_lower {
                g[i].max(0.0)
            } else if at_upper {
                g[i].min(0.0)
            } else {
                g[i]
            };
            worst = worst.max(pg.abs());
        }
        worst / n
    };

    for iter in 0..QMLE_MAX_ITER {
        iterations = iter;
        let g = design.score_from(&s2);
        residual = projected_residual(&theta, &g);
        if residual <= QMLE_TARGET {
            break;
        }

        // Working set: free coordinates not pressed outward against a
        // bound. Solving the scoring system on this set alone (rather than
        // clipping a full-space step into a binding face) keeps the fast
        // local convergence of Newton-type iterations on the active face.
        let working: Vec<usize> = free_idx
            .iter()
            .copied()
            .filter(|&i| {
                let at_lower =
                    theta[i] <= space.lower[i] + 1e-10 * (1.0 + space.lower[i].abs());
                let at_upper =
                    theta[i] >= space.upper[i] - 1e-10 * (1.0 + space.upper[i].abs());
                !(at_lower && g[i] < 0.0) && !(at_upper && g[i] > 0.0)
            })
            .collect();
        if working.is_empty() {
            break;
        }

        let g_w: Vec<f64> = working.iter().map(|&i| g[i]).collect();

        // Backtracking projected line search that moves only the working
        // coordinates; returns the accepted point or `None`.
        let try_direction = |direction: &[f64],
                             theta: &[f64],
                             loglik: f64|
         -> Option<(Vec<f64>, Vec<f64>, f64)> {
            let mut step = 1.0;
            for _ in 0..60 {
                let mut cand = theta.to_vec();
                for (k, &i) in working.iter().enumerate() {
                    cand[i] += step * direction[k];
                }
                space.clip(&mut cand);
                for i in 0..m {
                    if fixed[i] {
                        cand[i] = 0.0;
                    }
                }
                let moved: f64 = cand.iter().zip(theta).map(|(a, b)| (a - b).abs()).sum();
                if moved == 0.0 {
                    return None;
                }
                let cand_s2 =
                    design.variances(&cand).expect("box points have positive variances");
                let cand_ll = design.loglik_from(&cand_s2);
                let directional: f64 =
                    cand.iter().zip(theta).zip(&g).map(|((c, t), gi)| gi * (c - t)).sum();
                if cand_ll > loglik + 1e-4 * directional.max(0.0) && cand_ll.is_finite() {
                    return Some((cand, cand_s2, cand_ll));
                }
                step *= 0.5;
            }
            None
        };

        // Direction selection, best first. (1) A Newton step with the
        // observed curvature, attempted whenever that curvature is positive
        // definite on the working face -- near a maximizer it is, and the
        // step then converges quadratically. Expected-information scoring
        // alone can mismatch the true curvature along an ill-conditioned
        // valley and crawl in a two-point zigzag. (2) Scoring steps with
        // escalating ridge: the expected information is always positive
        // semidefinite, so this covers points where the observed curvature
        // is indefinite (common far from the optimum and at boundary fits).
        // (3) The projected gradient, which improves unless the point is
        // projected-stationary.
        let mut accepted = None;
        {
            let mut curv = design.hessian_from(&s2);
            curv.scale(-1.0);
            let curv_w = curv.submatrix(&working, &working);
            if let Ok(chol) = Cholesky::new(&curv_w, "observed curvature") {
                let d = chol.solve_vec(&g_w);
                accepted = try_direction(&d, &theta, loglik);
            }
        }
        if accepted.is_none() {
            let info = design.information_from(&s2);
            let info_w = info.submatrix(&working, &working);
            let mut ridge = 1e-10 * (1.0 + info_w.max_abs());
            for _ in 0..6 {
                let mut regularized = info_w.clone();
                for k in 0..working.len() {
                    regularized[(k, k)] += ridge;
                }
                if let Ok(chol) = Cholesky::new(&regularized, "expected information") {
                    let d = chol.solve_vec(&g_w);
                    if let Some(hit) = try_direction(&d, &theta, loglik) {
                        accepted = Some(hit);
                        break;
                    }
                }
                ridge *= 100.0;
            }
            if accepted.is_none() {
                let scale = (0..working.len())
                    .fold(0.0f64, |a, k| a.max(info_w[(k, k)].abs()))
                    .max(1.0);
                let d: Vec<f64> = g_w.iter().map(|v| v / scale).collect();
                accepted = try_direction(&d, &theta, loglik);
            }
        }
        match accepted {
            Some((t, v, ll)) => {
                theta = t;
                s2 = v;
                loglik = ll;
            }
            None => {
                // No direction improves: projected-stationary for our
                // purposes. The residual recorded above tells the caller
                // how good the point is.
                break;
            }
        }
    }

    QmleFit { theta, loglik, iterations, kkt_residual: residual }
}

/// One Newton step from the (possibly boundary-constrained) maximizer,
/// ignoring the constraints: `theta - H(theta)^{-1} g(theta)`. The result
/// may leave the parameter space; that is the point -- it restores the
/// asymptotic normality that the boundary destroys.
pub fn one_step_estimator(data: &ArchData, theta_hat: &[f64]) -> Result<Vec<f64>> {
    let design = data.design();
    let s2 = design.variances(theta_hat)?;
    let g = design.score_from(&s2);
    let h = design.hessian_from(&s2);
    let step = lu_solve(&h, &g, "one-step Hessian")?;
    Ok(theta_hat.iter().zip(&step).map(|(t, s)| t - s).collect())
}

/// Covariance estimates derived from the fitted model.
#[derive(Debug, Clone)]
pub struct ArchCovariances {
    /// Curvature estimate at the fit: `-Hessian / n` when that matrix is
    /// positive definite, otherwise the expected information divided by
    /// `n` (see [`ArchCovariances::expected_information`]).
    pub omega_hat: Mat,
    /// Score covariance estimate `(kappa_hat / 2) * omega_hat`.
    pub sigma_hat: Mat,
    /// Excess-kurtosis estimate of the standardized residuals
    /// (`mean(eps^4) - 1`; equals 2 for Gaussian innovations).
    pub kappa_hat: f64,
    /// Whether `kappa_hat` was floored at `1e-6` because the raw estimate
    /// was not positive.
    pub kappa_floored: bool,
    /// Covariance of `sqrt(n)` times the one-step nuisance block:
    /// `(kappa_hat / 2)` times the nuisance block of `omega_hat^{-1}`.
    pub sigma_beta_check: Mat,
    /// Whether `omega_hat` fell back to the expected information because
    /// the observed curvature `-Hessian / n` was not positive definite at
    /// the fit. Boundary fits with strongly anti-dependent covariates can
    /// leave the observed curvature indefinite in finite samples; the
    /// expected information estimates the same limit and is positive
    /// semidefinite by construction.
    pub expected_information: bool,
}

/// Computes curvature and score covariances at the fitted parameter, plus
/// the nuisance-block sandwich needed by the bracket construction.
pub fn arch_covariances(
    data: &ArchData,
    theta_hat: &[f64],
    beta_idx: &[usize],
) -> Result<ArchCovariances> {
    let design = data.design();
    let s2 = design.variances(theta_hat)?;
    let n = design.n() as f64;

    let mut omega_hat = design.hessian_from(&s2);
    omega_hat.scale(-1.0 / n);
    let expected_information = Cholesky::new(&omega_hat, "observed curvature").is_err();
    if expected_information {
        omega_hat = design.information_from(&s2);
        omega_hat.scale(1.0 / n);
    }

    let kappa_raw = design
        .y2
        .iter()
        .zip(&s2)
        .map(|(&y2, &v)| {
            let e2 = y2 / v;
            e2 * e2
        })
        .sum::<f64>()
        / n
        - 1.0;
    let kappa_floored = kappa_raw.is_nan() || kappa_raw <= 0.0;
    let kappa_hat = if kappa_floored { 1e-6 } else { kappa_raw };

    let mut sigma_hat = omega_hat.clone();
    sigma_hat.scale(kappa_hat / 2.0);

    let omega_inv = lu_inverse(&omega_hat, "curvature at the fit")?;
    let mut sigma_beta_check = omega_inv.submatrix(beta_idx, beta_idx);
    sigma_beta_check.scale(kappa_hat / 2.0);

    Ok(ArchCovariances {
        omega_hat,
        sigma_hat,
        kappa_hat,
        kappa_floored,
        sigma_beta_check,
        expected_information,
    })
}

/// The full estimation bundle behind an ARCH-X test.
#[derive(Debug, Clone)]
pub struct ArchFit {
    /// Unrestricted (alternative) QMLE over the box.
    pub theta_hat: Vec<f64>,
    /// Null-restricted QMLE (tested coordinates pinned to zero).
    pub theta_tilde: Vec<f64>,
    /// One-step estimator from `theta_hat`; may leave the box.
    pub theta_check: Vec<f64>,
    /// Excess-kurtosis estimate.
    pub kappa_hat: f64,
    /// Whether the kurtosis estimate was floored.
    pub kappa_floored: bool,
    /// Curvature estimate at `theta_hat`.
    pub omega_hat: Mat,
    /// Score covariance estimate at `theta_hat`.
    pub sigma_hat: Mat,
    /// Nuisance-block covariance of the scaled one-step estimator.
    pub sigma_beta_check: Mat,
    /// Whether the curvature estimate fell back to the expected
    /// information (see [`ArchCovariances::expected_information`]). The
    /// one-step estimator uses the same curvature matrix either way.
    pub expected_information: bool,
    /// Log-likelihood at the alternative fit.
    pub loglik_alt: f64,
    /// Log-likelihood at the null fit.
    pub loglik_null: f64,
    /// Likelihood-ratio statistic `2 (loglik_alt - loglik_null)`, clamped
    /// at zero against roundoff.
    pub lr: f64,
    /// Projected-score residual of the alternative fit.
    pub alt_kkt: f64,
    /// Projected-score residual of the null fit.
    pub null_kkt: f64,
}

/// Fits both hypotheses and assembles every estimate the test needs. The
/// alternative optimizer also starts from the null fit, which guarantees a
/// nonnegative likelihood-ratio statistic.
pub fn arch_fit(data: &ArchData, roles: &ArchRoles, space: &ArchParamSpace) -> Result<ArchFit> {
    roles.validate(data.dim())?;
    let design = data.design();
    let null_fit = qmle_multi(&design, space, &roles.gamma, None)?;
    let alt_fit = qmle_multi(&design, space, &[], Some(&null_fit.theta))?;

    let raw_lr = 2.0 * (alt_fit.loglik - null_fit.loglik);
    if raw_lr < -LR_SLACK * (1.0 + alt_fit.loglik.abs()) {
        return Err(Error::InternalConsistency {
            context: "restricted fit beat the unrestricted fit",
        });
    }

    let cov = arch_covariances(data, &alt_fit.theta, &roles.beta)?;
    // One unconstrained Newton-type step from the fit using the same
    // curvature matrix as the covariances: `theta + (n omega_hat)^{-1} g`,
    // which is exactly `theta - Hessian^{-1} g` when the observed
    // curvature is used.
    let theta_check = {
        let s2 = design.variances(&alt_fit.theta)?;
        let g = design.score_from(&s2);
        let mut curv = cov.omega_hat.clone();
        curv.scale(design.n() as f64);
        let step = lu_solve(&curv, &g, "one-step curvature")?;
        alt_fit.theta.iter().zip(&step).map(|(t, s)| t + s).collect()
    };

    Ok(ArchFit {
        theta_hat: alt_fit.theta,
        theta_tilde: null_fit.theta,
        theta_check,
        kappa_hat: cov.kappa_hat,
        kappa_floored: cov.kappa_floored,
        omega_hat: cov.omega_hat,
        sigma_hat: cov.sigma_hat,
        sigma_beta_check: cov.sigma_beta_check,
        expected_information: cov.expected_information,
        loglik_alt: alt_fit.loglik,
        loglik_null: null_fit.loglik,
        lr: raw_lr.max(0.0),
        alt_kkt: alt_fit.kkt_residual,
        null_kkt: null_fit.kkt_residual,
    })
}

/// Configuration for [`arch_test`].
#[derive(Debug, Clone)]
pub struct ArchTestConfig {
    /// Test level.
    pub alpha: f64,
    /// Bracket budget; `None` uses `alpha / 10`.
    pub eta: Option<f64>,
    /// Monte Carlo settings for the simulated quantiles.
    pub sim: SimConfig,
    /// Bracket bounds at or above this value are treated as unconstrained.
    pub bound_cap: f64,
    /// Parameter box; `None` uses [`ArchParamSpace::defaults`].
    pub space: Option<ArchParamSpace>,
}

impl ArchTestConfig {
    /// Conventional defaults: 5% level, `eta = alpha / 10`, default draw
    /// budget, default box.
    pub fn new(seed: u64) -> Self {
        ArchTestConfig {
            alpha: 0.05,
            eta: None,
            sim: SimConfig::new(seed),
            bound_cap: DEFAULT_BOUND_CAP,
            space: None,
        }
    }
}

/// Everything [`arch_test`] produces.
#[derive(Debug, Clone)]
pub struct ArchTestOutcome {
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
    /// Estimation bundle.
    pub fit: ArchFit,
}

/// Runs the full ARCH-X boundary test: both QMLE fits, the one-step
/// estimator and covariances, the uniformly valid critical value, and the
/// pointwise comparison.
pub fn arch_test(
    data: &ArchData,
    roles: &ArchRoles,
    cfg: &ArchTestConfig,
) -> Result<ArchTestOutcome> {
    let space = cfg.space.clone().unwrap_or_else(|| ArchParamSpace::defaults(data));
    let fit = arch_fit(data, roles, &space)?;

    let beta_check: Vec<f64> = roles.beta.iter().map(|&i| fit.theta_check[i]).collect();
    let limit = GaussianLimit::new(&fit.omega_hat, &fit.sigma_hat, roles.selection())?;
    let gamma_cone = vec![GammaKind::Boundary; roles.gamma.len()];
    let mut inputs = CvInputs::new(
        data.n(),
        cfg.alpha,
        beta_check,
        fit.sigma_beta_check.clone(),
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

    Ok(ArchTestOutcome {
        lr: fit.lr,
        decision: decide(fit.lr, cv.critical_value),
        naive_decision: decide(fit.lr, naive),
        cv,
        naive_cv: naive,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Constant-variance data: no covariates, no lags.
    fn constant_model(y: Vec<f64>) -> ArchData {
        let n = y.len();
        ArchData::new(y, Mat::zeros(n, 0), 0, vec![]).unwrap()
    }

    #[test]
    fn loglik_of_unit_variance_sums_squared_responses() {
        let data = constant_model(vec![1.0, 2.0]);
        // -(1/2) [(0 + 1) + (0 + 4)] = -2.5.
        assert_relative_eq!(arch_loglik(&data, &[1.0]).unwrap(), -2.5, max_relative = 1e-15);
    }

    #[test]
    fn nonpositive_variance_is_infeasible_with_location() {
        let data = constant_model(vec![1.0, 2.0]);
        match arch_loglik(&data, &[-1.0]) {
            Err(Error::InfeasibleTheta { index, value }) => {
                assert_eq!(index, 0);
                assert_eq!(value, -1.0);
            }
            other => panic!("expected InfeasibleTheta, got {other:?}"),
        }
    }

    #[test]
    fn score_vanishes_at_the_constant_model_mle() {
        // The constant-model QMLE is the mean squared response.
        let data = constant_model(vec![1.0, 2.0]);
        let g = arch_score(&data, &[2.5]).unwrap();
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-15);
        // Away from it the score is (1/2) sum (y^2 - delta) / delta^2.
        let g1 = arch_score(&data, &[1.0]).unwrap();
        assert_relative_eq!(g1[0], 1.5, max_relative = 1e-14);
    }

    #[test]
    fn hessian_matches_hand_value_for_constant_model() {
        let data = constant_model(vec![1.0, 2.0]);
        // H(delta) = -(1/2) sum [2 y^2 / d^3 - 1 / d^2]; at d = 1: -4.
        let h = arch_hessian(&data, &[1.0]).unwrap();
        assert_relative_eq!(h[(0, 0)], -4.0, max_relative = 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences_at_one_point() {
        // Smoke-level check; the full randomized sweep lives in the
        // integration tests.
        let x = Mat::from_fn(8, 1, |t, _| 0.5 + 0.1 * t as f64);
        let y = vec![0.6, -1.1, 0.4, 0.9, -0.3, 1.4, -0.8, 0.2];
        let data = ArchData::with_mean_presample(y, x, 1).unwrap();
        let theta = vec![0.3, 0.2, 0.4];
        let g = arch_score(&data, &theta).unwrap();
        for i in 0..theta.len() {
            let h = 1e-6 * (1.0 + theta[i].abs());
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let fd = (arch_loglik(&data, &up).unwrap() - arch_loglik(&data, &dn).unwrap())
                / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn qmle_recovers_constant_model_mean() {
        let y = vec![0.5, -1.5, 2.0, -0.5, 1.0, -2.0, 0.8, -0.9, 1.2, 0.1];
        let mean_y2 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let data = constant_model(y);
        let space = ArchParamSpace::defaults(&data);
        let fit = arch_qmle(&data, &space, &[]).unwrap();
        assert_relative_eq!(fit.theta[0], mean_y2, max_relative = 1e-6);
        assert!(fit.kkt_residual <= 1e-6);
    }

    #[test]
    fn one_step_is_a_newton_step_and_fixes_interior_optima() {
        let data = constant_model(vec![1.0, 2.0]);
        // From delta = 1: g = 1.5, H = -4, so the step lands at 1.375.
        let check = one_step_estimator(&data, &[1.0]).unwrap();
        assert_relative_eq!(check[0], 1.375, max_relative = 1e-14);
        // At the interior optimum the score is zero: fixed point.
        let fixed = one_step_estimator(&data, &[2.5]).unwrap();
        assert_relative_eq!(fixed[0], 2.5, max_relative = 1e-12);
    }

    #[test]
    fn covariances_match_hand_values_for_constant_model() {
        let data = constant_model(vec![1.0, 2.0]);
        let cov = arch_covariances(&data, &[2.5], &[]).unwrap();
        // eps^2 = (0.4, 1.6); kappa = mean(eps^4) - 1 = 0.36.
        assert_relative_eq!(cov.kappa_hat, 0.36, max_relative = 1e-13);
        assert!(!cov.kappa_floored);
        // -H/n at delta = 2.5 evaluates to 0.08.
        assert_relative_eq!(cov.omega_hat[(0, 0)], 0.08, max_relative = 1e-13);
        assert_relative_eq!(cov.sigma_hat[(0, 0)], 0.18 * 0.08, max_relative = 1e-13);
        assert_eq!(cov.sigma_beta_check.rows(), 0);
    }

    #[test]
    fn box_validation_catches_bad_intercept_floor() {
        assert!(ArchParamSpace::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(ArchParamSpace::new(vec![0.0, 0.1], vec![1.0, 0.05]).is_err());
        assert!(ArchParamSpace::new(vec![0.0, 0.1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn default_box_scales_with_the_data() {
        let data = constant_model(vec![2.0, -2.0, 2.0, -2.0, 2.0]);
        let space = ArchParamSpace::defaults(&data);
        assert_relative_eq!(space.lower[0], 1e-8 * 4.0, max_relative = 1e-12);
        assert_relative_eq!(space.upper[0], 1e3 * 4.0, max_relative = 1e-12);
    }

    #[test]
    fn roles_cannot_touch_the_intercept_or_be_empty() {
        // dim = 3: coordinates 0 and 1 assignable, 2 is the intercept.
        let empty = ArchRoles { gamma: vec![], beta: vec![0] };
        assert!(empty.validate(3).is_err());
        let intercept = ArchRoles { gamma: vec![2], beta: vec![] };
        assert!(intercept.validate(3).is_err());
        let overlap = ArchRoles { gamma: vec![0], beta: vec![0] };
        assert!(overlap.validate(3).is_err());
        let ok = ArchRoles { gamma: vec![0], beta: vec![1] };
        assert!(ok.validate(3).is_ok());
    }

    #[test]
    fn covariates_must_be_nonnegative() {
        let mut x = Mat::zeros(5, 1);
        x[(2, 0)] = -0.1;
        assert!(ArchData::new(vec![1.0; 5], x, 0, vec![]).is_err());
    }

    #[test]
    fn presample_fills_early_lag_slots() {
        let y = vec![1.0, 2.0, 3.0, 1.0, 2.0];
        let data = ArchData::new(y, Mat::zeros(5, 0), 2, vec![9.0, 16.0]).unwrap();
        let f = data.regressor_matrix();
        // Row 0 lags: y^2_{-1} = 9, y^2_{-2} = 16 from the presample.
        assert_eq!(f[(0, 0)], 9.0);
        assert_eq!(f[(0, 1)], 16.0);
        // Row 1 lags: y^2_0 = 1 observed, y^2_{-1} = 9 from the presample.
        assert_eq!(f[(1, 0)], 1.0);
        assert_eq!(f[(1, 1)], 9.0);
        // Row 2 onward everything is observed.
        assert_eq!(f[(2, 0)], 4.0);
        assert_eq!(f[(2, 1)], 1.0);
        // Intercept column is all ones.
        assert_eq!(f[(4, 2)], 1.0);
    }
}
