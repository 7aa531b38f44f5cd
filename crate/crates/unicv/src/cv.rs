//! Uniformly valid critical values for likelihood-ratio tests with
//! boundary-constrained nuisance parameters.
//!
//! The pointwise (naive) critical value treats every nuisance parameter as
//! interior, which under-covers when a nuisance coefficient is at or near
//! its boundary. The engine here restores validity by a two-stage
//! construction: first a simultaneous confidence bracket for the scaled
//! nuisance block (paid for by a small level adjustment `eta`), then the
//! worst-case quantile of the limit statistic over that bracket, using the
//! bracketing cones' monotonicity so only one cone pair must be simulated.
//! The test rejects when the likelihood-ratio statistic reaches the
//! resulting critical value.

use crate::error::{Error, Result};
use crate::limit::{
    max_abs_gaussian_quantile, simulate_limit_quantile, simulate_limit_quantile_stream,
    GammaKind, GaussianLimit, HypothesisCones,
};
use crate::linalg::Mat;
use crate::rng::StreamDomain;

/// Default number of Monte Carlo draws for every simulated quantile.
pub const DEFAULT_DRAWS: usize = 10_000;

/// Default cap above which a nuisance bound is treated as unconstrained.
pub const DEFAULT_BOUND_CAP: f64 = 1e6;

/// Pointwise critical value for a single boundary-tested coefficient at the
/// conventional 5% level (the textbook half-chi-squared mixture quantile).
pub const SCALAR_BOUNDARY_CV_5PCT: f64 = 2.71;

/// Monte Carlo settings shared by the quantile simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Number of draws per simulated quantile.
    pub draws: usize,
    /// Master seed; each simulation stage opens its own substream.
    pub seed: u64,
}

impl SimConfig {
    /// Default draw budget with the given seed.
    pub fn new(seed: u64) -> Self {
        SimConfig { draws: DEFAULT_DRAWS, seed }
    }

    /// Overrides the draw budget.
    pub fn with_draws(mut self, draws: usize) -> Self {
        self.draws = draws;
        self
    }
}

/// Everything the critical-value construction needs from a fitted model.
#[derive(Debug, Clone)]
pub struct CvInputs<'a> {
    /// Sample size behind the estimates (scales the nuisance bracket).
    pub n: usize,
    /// Test level.
    pub alpha: f64,
    /// Bracket budget; must lie strictly inside `(0, alpha)`.
    pub eta: f64,
    /// Unconstrained (one-step) estimate of the boundary-nuisance block.
    pub beta_check: Vec<f64>,
    /// Estimated covariance of `sqrt(n)` times that estimate.
    pub sigma_beta_check: Mat,
    /// The fitted limit experiment (curvature, score covariance, selection).
    pub limit: &'a GaussianLimit,
    /// Constraint kind of each tested coordinate, in selection order.
    pub gamma_cone: Vec<GammaKind>,
    /// Monte Carlo settings.
    pub sim: SimConfig,
    /// Bounds at or above this value are treated as unconstrained.
    pub bound_cap: f64,
}

impl<'a> CvInputs<'a> {
    /// Builds inputs with the recommended default `eta = alpha / 10` and the
    /// default bound cap. Fields are public for adjustment afterwards.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        alpha: f64,
        beta_check: Vec<f64>,
        sigma_beta_check: Mat,
        limit: &'a GaussianLimit,
        gamma_cone: Vec<GammaKind>,
        sim: SimConfig,
    ) -> Self {
        CvInputs {
            n,
            alpha,
            eta: alpha / 10.0,
            beta_check,
            sigma_beta_check,
            limit,
            gamma_cone,
            sim,
            bound_cap: DEFAULT_BOUND_CAP,
        }
    }
}

/// Bookkeeping recorded alongside a critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvDiagnostics {
    /// Draws used per simulated quantile.
    pub draws: usize,
    /// Seed the substreams derived from.
    pub seed: u64,
    /// Bracket budget actually used.
    pub eta: f64,
    /// Number of bracket bounds at or above the cap (treated as free).
    pub capped_bounds: usize,
}

/// A uniformly valid critical value and the bracket that produced it.
#[derive(Debug, Clone)]
pub struct CvResult {
    /// The critical value: reject when the statistic reaches it.
    pub critical_value: f64,
    /// Lower bracket half-widths for the scaled nuisance block (floored at
    /// zero).
    pub b_lower: Vec<f64>,
    /// Upper bracket half-widths (floored at zero).
    pub b_upper: Vec<f64>,
    /// Simulated quantile of the max-abs Gaussian used for the bracket;
    /// absent when there is no nuisance block.
    pub q_max_abs: Option<f64>,
    /// Correlation matrix the bracket quantile was drawn from; absent when
    /// there is no nuisance block.
    pub correlation_used: Option<Mat>,
    /// Quantile level of the limit statistic, `1 - alpha + eta`.
    pub level_used: f64,
    /// Simulation bookkeeping.
    pub diagnostics: CvDiagnostics,
}

/// Outcome of comparing a statistic to its critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// The statistic reached the critical value.
    Reject,
    /// It did not.
    FailToReject,
}

/// Rescales a covariance matrix to a correlation matrix. Fails with
/// [`Error::NonPositiveDiagonal`] if any variance is zero or negative.
pub fn correlation_from_covariance(cov: &Mat) -> Result<Mat> {
    let d = cov.rows();
    if cov.cols() != d {
        return Err(Error::DimensionMismatch {
            context: "covariance matrix must be square",
            expected: d,
            got: cov.cols(),
        });
    }
    let mut sd = Vec::with_capacity(d);
    for i in 0..d {
        let v = cov[(i, i)];
        if v.is_nan() || v <= 0.0 {
            return Err(Error::NonPositiveDiagonal { index: i, value: v });
        }
        sd.push(v.sqrt());
    }
    let mut out = Mat::from_fn(d, d, |i, j| cov[(i, j)] / (sd[i] * sd[j]));
    for i in 0..d {
        out[(i, i)] = 1.0;
    }
    Ok(out)
}

/// Simultaneous confidence bracket for the scaled nuisance block:
/// `sqrt(n) * beta_check_i -/+ q * sd_i`, floored at zero because the
/// nuisance parameters are known to be nonnegative.
///
/// Returns `(lower, upper)` half-width vectors.
pub fn confidence_bounds(
    beta_check: &[f64],
    sigma_beta_check: &Mat,
    n: usize,
    q: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = beta_check.len();
    if sigma_beta_check.rows() != d || sigma_beta_check.cols() != d {
        return Err(Error::DimensionMismatch {
            context: "nuisance covariance vs estimate length",
            expected: d,
            got: sigma_beta_check.rows(),
        });
    }
    let root_n = (n as f64).sqrt();
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for i in 0..d {
        let v = sigma_beta_check[(i, i)];
        if v < 0.0 {
            return Err(Error::NonPositiveDiagonal { index: i, value: v });
        }
        let sd = v.sqrt();
        let center = root_n * beta_check[i];
        lower.push((center - q * sd).max(0.0));
        upper.push((center + q * sd).max(0.0));
    }
    Ok((lower, upper))
}

/// Computes the uniformly valid critical value.
///
/// With a non-empty nuisance block this runs the full construction: bracket
/// quantile at level `1 - eta`, scaled confidence bounds floored at zero,
/// then the `1 - alpha + eta` quantile of the limit statistic over the
/// bracketing cone pair. Without a nuisance block the bracket stages are
/// skipped and the critical value is the `1 - alpha + eta` quantile of the
/// tested-block law alone. The bracket simulation and the quantile
/// simulation always use independent substreams of the one configured seed.
pub fn uniform_cv(inputs: &CvInputs) -> Result<CvResult> {
    if !(inputs.alpha > 0.0 && inputs.alpha < 1.0)
        || !(inputs.eta > 0.0 && inputs.eta < inputs.alpha)
    {
        return Err(Error::InvalidEtaAlpha { eta: inputs.eta, alpha: inputs.alpha });
    }
    if inputs.n == 0 {
        return Err(Error::InvalidConfiguration { context: "sample size is zero".into() });
    }
    let d_beta = inputs.beta_check.len();
    let selected = inputs.gamma_cone.len() + d_beta;
    if inputs.limit.selected_dim() != selected {
        return Err(Error::DimensionMismatch {
            context: "limit selection vs tested + nuisance coordinates",
            expected: inputs.limit.selected_dim(),
            got: selected,
        });
    }
    let level = 1.0 - inputs.alpha + inputs.eta;

    let (b_lower, b_upper, q_max_abs, correlation_used) = if d_beta == 0 {
        (Vec::new(), Vec::new(), None, None)
    } else {
        let corr = correlation_from_covariance(&inputs.sigma_beta_check)?;
        let q = max_abs_gaussian_quantile(
            &corr,
            1.0 - inputs.eta,
            inputs.sim.draws,
            inputs.sim.seed,
        )?;
        let (lo, up) =
            confidence_bounds(&inputs.beta_check, &inputs.sigma_beta_check, inputs.n, q.value)?;
        (lo, up, Some(q.value), Some(corr))
    };

    let cones =
        HypothesisCones::from_bounds(&inputs.gamma_cone, &b_lower, &b_upper, inputs.bound_cap)?;
    let quantile = simulate_limit_quantile(
        inputs.limit,
        &cones,
        level,
        inputs.sim.draws,
        inputs.sim.seed,
    )?;

    let capped_bounds = b_lower
        .iter()
        .chain(&b_upper)
        .filter(|&&b| !b.is_finite() || b >= inputs.bound_cap)
        .count();
    Ok(CvResult {
        critical_value: quantile.value,
        b_lower,
        b_upper,
        q_max_abs,
        correlation_used,
        level_used: level,
        diagnostics: CvDiagnostics {
            draws: inputs.sim.draws,
            seed: inputs.sim.seed,
            eta: inputs.eta,
            capped_bounds,
        },
    })
}

/// Pointwise critical value that treats the nuisance block as interior.
///
/// For a single boundary-tested coordinate at `alpha = 0.05` this is the
/// fixed constant [`SCALAR_BOUNDARY_CV_5PCT`]; any other configuration is
/// simulated from the limit law with the nuisance block unconstrained, on
/// its own substream.
pub fn naive_cv(
    limit: &GaussianLimit,
    gamma_cone: &[GammaKind],
    d_beta: usize,
    alpha: f64,
    sim: &SimConfig,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel { level: alpha, draws: sim.draws });
    }
    if gamma_cone == [GammaKind::Boundary] && alpha == 0.05 {
        return Ok(SCALAR_BOUNDARY_CV_5PCT);
    }
    let free = vec![f64::INFINITY; d_beta];
    let cones = HypothesisCones::from_bounds(gamma_cone, &free, &free, DEFAULT_BOUND_CAP)?;
    let q = simulate_limit_quantile_stream(
        limit,
        &cones,
        1.0 - alpha,
        sim.draws,
        sim.seed,
        StreamDomain::NaiveDraws,
    )?;
    Ok(q.value)
}

/// Compares a likelihood-ratio statistic to a critical value; the
/// inequality is weak, so hitting the critical value exactly rejects.
pub fn decide(lr_stat: f64, critical_value: f64) -> Decision {
    if lr_stat >= critical_value {
        Decision::Reject
    } else {
        Decision::FailToReject
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn correlation_rescales_covariance() {
        let cov = Mat::from_rows(&[vec![4.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let corr = correlation_from_covariance(&cov).unwrap();
        assert_eq!(corr[(0, 0)], 1.0);
        assert_eq!(corr[(1, 1)], 1.0);
        assert_relative_eq!(corr[(0, 1)], 0.5, max_relative = 1e-15);
        assert_relative_eq!(corr[(1, 0)], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn correlation_rejects_zero_variance() {
        let cov = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            correlation_from_covariance(&cov),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn bounds_scale_and_floor() {
        let sigma = Mat::identity(1);
        let (lo, up) = confidence_bounds(&[0.5], &sigma, 100, 2.0).unwrap();
        assert_relative_eq!(lo[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(up[0], 7.0, max_relative = 1e-14);
        // A strongly negative estimate floors both sides at zero.
        let (lo, up) = confidence_bounds(&[-1.0], &sigma, 100, 2.0).unwrap();
        assert_eq!(lo[0], 0.0);
        assert_eq!(up[0], 0.0);
    }

    #[test]
    fn eta_validation_brackets_alpha() {
        let limit =
            GaussianLimit::new(&Mat::identity(1), &Mat::identity(1), vec![0]).unwrap();
        let mut inputs = CvInputs::new(
            100,
            0.05,
            vec![],
            Mat::zeros(0, 0),
            &limit,
            vec![GammaKind::Boundary],
            SimConfig::new(1).with_draws(200),
        );
        inputs.eta = 0.1;
        assert!(matches!(uniform_cv(&inputs), Err(Error::InvalidEtaAlpha { .. })));
        inputs.eta = 0.0;
        assert!(matches!(uniform_cv(&inputs), Err(Error::InvalidEtaAlpha { .. })));
        inputs.eta = 0.05;
        assert!(matches!(uniform_cv(&inputs), Err(Error::InvalidEtaAlpha { .. })));
    }

    #[test]
    fn default_eta_is_a_tenth_of_alpha() {
        let limit =
            GaussianLimit::new(&Mat::identity(1), &Mat::identity(1), vec![0]).unwrap();
        let inputs = CvInputs::new(
            100,
            0.05,
            vec![],
            Mat::zeros(0, 0),
            &limit,
            vec![GammaKind::Boundary],
            SimConfig::new(1),
        );
        assert_relative_eq!(inputs.eta, 0.005, max_relative = 1e-15);
        assert_eq!(inputs.bound_cap, DEFAULT_BOUND_CAP);
        assert_eq!(inputs.sim.draws, DEFAULT_DRAWS);
    }

    #[test]
    fn no_nuisance_block_skips_bracket_stages() {
        let limit =
            GaussianLimit::new(&Mat::identity(1), &Mat::identity(1), vec![0]).unwrap();
        let inputs = CvInputs::new(
            100,
            0.05,
            vec![],
            Mat::zeros(0, 0),
            &limit,
            vec![GammaKind::Boundary],
            SimConfig::new(9).with_draws(2_000),
        );
        let res = uniform_cv(&inputs).unwrap();
        assert!(res.q_max_abs.is_none());
        assert!(res.correlation_used.is_none());
        assert!(res.b_lower.is_empty() && res.b_upper.is_empty());
        assert_relative_eq!(res.level_used, 0.955, max_relative = 1e-12);
        assert!(res.critical_value > 0.0);
    }

    #[test]
    fn bracket_is_reproducible_and_recorded() {
        let limit =
            GaussianLimit::new(&Mat::identity(2), &Mat::identity(2), vec![0, 1]).unwrap();
        let inputs = CvInputs::new(
            400,
            0.05,
            vec![0.2],
            Mat::identity(1),
            &limit,
            vec![GammaKind::Boundary],
            SimConfig::new(3).with_draws(1_000),
        );
        let a = uniform_cv(&inputs).unwrap();
        let b = uniform_cv(&inputs).unwrap();
        assert_eq!(a.critical_value, b.critical_value);
        assert_eq!(a.b_lower, b.b_lower);
        let q = a.q_max_abs.unwrap();
        // Bracket: 20 * 0.2 = 4 scaled center, unit sd.
        assert_relative_eq!(a.b_lower[0], (4.0 - q).max(0.0), max_relative = 1e-12);
        assert_relative_eq!(a.b_upper[0], 4.0 + q, max_relative = 1e-12);
        assert_eq!(a.diagnostics.capped_bounds, 0);
    }

    #[test]
    fn decision_inequality_is_weak() {
        assert_eq!(decide(2.71, 2.71), Decision::Reject);
        assert_eq!(decide(2.70999, 2.71), Decision::FailToReject);
        assert_eq!(decide(3.0, 2.71), Decision::Reject);
    }

    #[test]
    fn scalar_boundary_naive_cv_is_the_textbook_constant() {
        let limit =
            GaussianLimit::new(&Mat::identity(2), &Mat::identity(2), vec![0, 1]).unwrap();
        let cv = naive_cv(&limit, &[GammaKind::Boundary], 1, 0.05, &SimConfig::new(1)).unwrap();
        assert_eq!(cv, 2.71);
    }
}
