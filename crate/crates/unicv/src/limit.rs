//! The asymptotic distribution of the likelihood-ratio statistic when some
//! parameters may sit on the boundary of the parameter space.
//!
//! The limiting statistic is a difference of two weighted least-distance
//! values: a Gaussian score draw is projected onto a null cone and onto an
//! (enclosing) alternative cone, and the statistic is the gap between the
//! two squared distances. This module owns the Gaussian draw machinery, the
//! cone-pair bookkeeping, and the Monte Carlo quantile estimators built on
//! top of [`crate::qp`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cone::{ConeSpec, Constraint};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::qp::{infimum_over_cone, QuadraticProblem};
use crate::rng::{derive_seed, SeedStreams, StreamDomain};

/// Relative tolerance for symmetry checks on input covariance matrices.
const SYMMETRY_TOL: f64 = 1e-10;

/// Negative values of the limit statistic smaller than this (for nested
/// cones) indicate a bug rather than roundoff.
const NEGATIVITY_TOL: f64 = 1e-10;

/// How a tested-model nuisance coordinate enters the alternative parameter
/// space: an interior coordinate is unrestricted in the limit, a boundary
/// coordinate is restricted to the nonnegative half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaKind {
    /// Known-interior coordinate; the limit cone does not constrain it.
    Interior,
    /// Coordinate whose true value may sit at zero; constrained to `[0, inf)`
    /// under the alternative and pinned to zero under the null.
    Boundary,
}

/// The Gaussian limit experiment: curvature matrix `omega`, score
/// covariance `sigma`, and the coordinates of the tested/nuisance block
/// within the full parameter vector.
///
/// Construction factors everything the simulators need: the projection
/// weight `(H omega^{-1} H')^{-1}` on the selected coordinates and a
/// Cholesky factor of the full sandwich `omega^{-1} sigma omega^{-1}` for
/// drawing score limits.
#[derive(Debug, Clone)]
pub struct GaussianLimit {
    selection: Vec<usize>,
    dim_full: usize,
    weight: Mat,
    sandwich_chol: Cholesky,
}

impl GaussianLimit {
    /// Builds the limit experiment. Both matrices must be symmetric positive
    /// definite of equal dimension; `selection` lists the tested and
    /// boundary-nuisance coordinates (in the order the cones will use) and
    /// must be non-empty with distinct in-range entries.
    pub fn new(omega: &Mat, sigma: &Mat, selection: Vec<usize>) -> Result<Self> {
        let d = omega.rows();
        if omega.cols() != d {
            return Err(Error::DimensionMismatch {
                context: "curvature matrix must be square",
                expected: d,
                got: omega.cols(),
            });
        }
        if sigma.rows() != d || sigma.cols() != d {
            return Err(Error::DimensionMismatch {
                context: "score covariance vs curvature dimension",
                expected: d,
                got: sigma.rows(),
            });
        }
        if omega.asymmetry() > SYMMETRY_TOL {
            return Err(Error::NotPositiveDefinite { context: "curvature matrix not symmetric" });
        }
        if sigma.asymmetry() > SYMMETRY_TOL {
            return Err(Error::NotPositiveDefinite {
                context: "score covariance not symmetric",
            });
        }
        if selection.is_empty() {
            return Err(Error::InvalidConfiguration {
                context: "selection of tested coordinates is empty".into(),
            });
        }
        let mut seen = vec![false; d];
        for &i in &selection {
            if i >= d {
                return Err(Error::DimensionMismatch {
                    context: "selection index out of range",
                    expected: d,
                    got: i,
                });
            }
            if seen[i] {
                return Err(Error::InvalidConfiguration {
                    context: format!("selection index {i} repeats"),
                });
            }
            seen[i] = true;
        }

        let omega_inv = Cholesky::new(omega, "curvature matrix")?.inverse();
        // Projection metric on the selected block.
        let block = omega_inv.submatrix(&selection, &selection);
        let weight = Cholesky::new(&block, "selected curvature block")?.inverse();
        // Sandwich covariance of the score limit, factored once for drawing.
        let sandwich = omega_inv.matmul(sigma).matmul(&omega_inv);
        // Symmetrize: the triple product picks up harmless roundoff skew.
        let sandwich_sym = {
            let t = sandwich.transpose();
            let mut s = sandwich.add(&t);
            s.scale(0.5);
            s
        };
        let sandwich_chol = Cholesky::new(&sandwich_sym, "sandwich covariance")?;
        Ok(GaussianLimit { selection, dim_full: d, weight, sandwich_chol })
    }

    /// Dimension of the full parameter vector.
    pub fn dim_full(&self) -> usize {
        self.dim_full
    }

    /// Number of selected (tested + boundary-nuisance) coordinates.
    pub fn selected_dim(&self) -> usize {
        self.selection.len()
    }

    /// The selected coordinate indices.
    pub fn selection(&self) -> &[usize] {
        &self.selection
    }

    /// The projection weight `(H omega^{-1} H')^{-1}`.
    pub fn weight(&self) -> &Mat {
        &self.weight
    }

    /// One draw of the selected components of the Gaussian score limit.
    pub fn draw_selected<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.dim_full).map(|_| rng.sample(StandardNormal)).collect();
        let full = self.sandwich_chol.transform(&xi);
        self.selection.iter().map(|&i| full[i]).collect()
    }
}

/// A nested pair of constraint cones on the selected coordinates: the null
/// cone (tested coordinates pinned to zero) inside the alternative cone.
#[derive(Debug, Clone)]
pub struct HypothesisCones {
    null_cone: ConeSpec,
    alt_cone: ConeSpec,
    nested: bool,
}

impl HypothesisCones {
    /// Builds a cone pair from explicit cones of equal dimension. Nestedness
    /// is recorded so the statistic simulator knows whether negative values
    /// are admissible.
    pub fn new(null_cone: ConeSpec, alt_cone: ConeSpec) -> Result<Self> {
        if null_cone.dim() != alt_cone.dim() {
            return Err(Error::DimensionMismatch {
                context: "null vs alternative cone dimension",
                expected: null_cone.dim(),
                got: alt_cone.dim(),
            });
        }
        let nested = null_cone.is_subset_of(&alt_cone);
        Ok(HypothesisCones { null_cone, alt_cone, nested })
    }

    /// Standard cone pair for testing the `gamma` block against bracketed
    /// nuisance bounds: under the null the tested coordinates are pinned to
    /// zero and nuisance coordinate `i` ranges over `[-lower[i], inf)`;
    /// under the alternative the tested coordinates follow their
    /// [`GammaKind`] and nuisance coordinate `i` ranges over
    /// `[-upper[i], inf)`.
    ///
    /// Bounds at or above `cap` (or infinite) are treated as unconstrained.
    /// All bounds must be nonnegative: they are half-widths around zero.
    pub fn from_bounds(
        gamma: &[GammaKind],
        lower: &[f64],
        upper: &[f64],
        cap: f64,
    ) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "lower vs upper bound vectors",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let bound_constraint = |b: f64| -> Result<Constraint> {
            if b.is_nan() || b < 0.0 {
                return Err(Error::InvalidBound { value: b });
            }
            if !b.is_finite() || b >= cap {
                Ok(Constraint::Free)
            } else {
                Ok(Constraint::LowerBound(-b))
            }
        };
        let mut null_c = Vec::with_capacity(gamma.len() + lower.len());
        let mut alt_c = Vec::with_capacity(gamma.len() + lower.len());
        for kind in gamma {
            null_c.push(Constraint::FixedZero);
            alt_c.push(match kind {
                GammaKind::Interior => Constraint::Free,
                GammaKind::Boundary => Constraint::LowerBound(0.0),
            });
        }
        for (&lo, &up) in lower.iter().zip(upper) {
            null_c.push(bound_constraint(lo)?);
            alt_c.push(bound_constraint(up)?);
        }
        HypothesisCones::new(ConeSpec::new(null_c)?, ConeSpec::new(alt_c)?)
    }

    /// The null cone.
    pub fn null_cone(&self) -> &ConeSpec {
        &self.null_cone
    }

    /// The alternative cone.
    pub fn alt_cone(&self) -> &ConeSpec {
        &self.alt_cone
    }

    /// Whether the null cone is contained in the alternative cone.
    pub fn is_nested(&self) -> bool {
        self.nested
    }

    /// Common dimension of the two cones.
    pub fn dim(&self) -> usize {
        self.null_cone.dim()
    }
}

/// A simulated quantile together with the request that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    /// The estimated quantile.
    pub value: f64,
    /// Requested probability level.
    pub level: f64,
    /// Number of Monte Carlo draws used.
    pub draws: usize,
    /// Seed the draws derived from.
    pub seed: u64,
}

/// One realization of the limit statistic at a given score draw `z`:
/// the null-cone squared distance minus the alternative-cone squared
/// distance, both in the limit experiment's projection metric.
///
/// For nested cones the statistic is nonnegative up to roundoff; values in
/// `[-1e-10, 0)` are clamped to zero and anything more negative reports an
/// internal-consistency failure. Non-nested cone pairs may legitimately
/// produce negative values, which are returned untouched.
pub fn draw_limit_stat(
    limit: &GaussianLimit,
    cones: &HypothesisCones,
    z: &[f64],
) -> Result<f64> {
    if z.len() != limit.selected_dim() {
        return Err(Error::DimensionMismatch {
            context: "score draw vs selected dimension",
            expected: limit.selected_dim(),
            got: z.len(),
        });
    }
    if cones.dim() != limit.selected_dim() {
        return Err(Error::DimensionMismatch {
            context: "cones vs selected dimension",
            expected: limit.selected_dim(),
            got: cones.dim(),
        });
    }
    let problem = QuadraticProblem::new(limit.weight().clone(), z.to_vec())?;
    let null_inf = infimum_over_cone(&problem, cones.null_cone())?;
    let alt_inf = infimum_over_cone(&problem, cones.alt_cone())?;
    let stat = null_inf - alt_inf;
    if cones.is_nested() && stat < 0.0 {
        if stat < -NEGATIVITY_TOL * (1.0 + null_inf.abs()) {
            return Err(Error::InternalConsistency {
                context: "nested cones produced a negative statistic beyond roundoff",
            });
        }
        return Ok(0.0);
    }
    Ok(stat)
}

/// Validates a quantile request: level strictly inside (0, 1) and at least
/// 100 draws.
fn check_level(level: f64, draws: usize) -> Result<()> {
    if !(level > 0.0 && level < 1.0) || draws < 100 {
        return Err(Error::InvalidLevel { level, draws });
    }
    Ok(())
}

/// Upper empirical quantile: the `ceil(level * n)`-th order statistic of
/// `values` (sorted in place). A tiny guard absorbs the float error in the
/// product so that exact-integer levels pick the intended order statistic.
pub fn empirical_upper_quantile(values: &mut [f64], level: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    let k = ((level * n as f64) - 1e-9).ceil().max(1.0) as usize;
    values[k.min(n) - 1]
}

/// Estimates a quantile of the limit statistic by Monte Carlo, using the
/// dedicated critical-value substream of `seed`.
pub fn simulate_limit_quantile(
    limit: &GaussianLimit,
    cones: &HypothesisCones,
    level: f64,
    draws: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    simulate_limit_quantile_stream(limit, cones, level, draws, seed, StreamDomain::LimitDraws)
}

/// As [`simulate_limit_quantile`], but drawing from an explicit substream
/// domain so different critical-value simulations under one seed stay
/// independent.
pub fn simulate_limit_quantile_stream(
    limit: &GaussianLimit,
    cones: &HypothesisCones,
    level: f64,
    draws: usize,
    seed: u64,
    domain: StreamDomain,
) -> Result<QuantileEstimate> {
    check_level(level, draws)?;
    let mut rng = SeedStreams::new(seed).stream(domain, 0);
    let mut sample = Vec::with_capacity(draws);
    for _ in 0..draws {
        let z = limit.draw_selected(&mut rng);
        sample.push(draw_limit_stat(limit, cones, &z)?);
    }
    Ok(QuantileEstimate {
        value: empirical_upper_quantile(&mut sample, level),
        level,
        draws,
        seed,
    })
}

/// Quantile of `max_i |Z_i|` for `Z ~ N(0, corr)`, where `corr` must be a
/// positive-definite correlation matrix (unit diagonal within `1e-10`).
/// Draws come from the bracket substream of `seed`.
pub fn max_abs_gaussian_quantile(
    corr: &Mat,
    level: f64,
    draws: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    check_level(level, draws)?;
    let d = corr.rows();
    if corr.cols() != d {
        return Err(Error::DimensionMismatch {
            context: "correlation matrix must be square",
            expected: d,
            got: corr.cols(),
        });
    }
    if d == 0 {
        return Err(Error::InvalidConfiguration {
            context: "correlation matrix is empty".into(),
        });
    }
    for i in 0..d {
        if (corr[(i, i)] - 1.0).abs() > 1e-10 {
            return Err(Error::NotACorrelationMatrix { index: i, value: corr[(i, i)] });
        }
    }
    let chol = Cholesky::new(corr, "correlation matrix")?;
    let mut rng = SeedStreams::new(seed).stream(StreamDomain::MaxAbsDraws, 0);
    let mut sample = Vec::with_capacity(draws);
    for _ in 0..draws {
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let z = chol.transform(&xi);
        sample.push(z.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    Ok(QuantileEstimate {
        value: empirical_upper_quantile(&mut sample, level),
        level,
        draws,
        seed,
    })
}

/// One point of the bivariate quantile surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    /// Correlation between the tested and nuisance score components.
    pub rho: f64,
    /// Symmetric nuisance bound (half-width of the nuisance cone).
    pub b: f64,
    /// Simulated quantile of the limit statistic.
    pub quantile: f64,
}

/// Tabulates quantiles of the limit statistic for the canonical
/// two-parameter experiment: one boundary-tested coordinate and one boundary
/// nuisance coordinate with correlation `rho` (curvature and score
/// covariance both equal to the correlation matrix), nuisance bound `b` on
/// both sides of the cone pair.
///
/// Each grid point uses its own seed derived from `(seed, row, column)`, so
/// the table is reproducible point by point.
pub fn quantile_surface(
    rhos: &[f64],
    bs: &[f64],
    level: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<SurfacePoint>> {
    check_level(level, draws)?;
    let mut out = Vec::with_capacity(rhos.len() * bs.len());
    for (i, &rho) in rhos.iter().enumerate() {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidConfiguration {
                context: format!("correlation {rho} outside (-1, 1)"),
            });
        }
        let m = Mat::from_rows(&[vec![1.0, rho], vec![rho, 1.0]])?;
        let limit = GaussianLimit::new(&m, &m, vec![0, 1])?;
        for (j, &b) in bs.iter().enumerate() {
            let cones =
                HypothesisCones::from_bounds(&[GammaKind::Boundary], &[b], &[b], 1e6)?;
            let point_seed = derive_seed(seed, i as u64, j as u64);
            let q = simulate_limit_quantile(&limit, &cones, level, draws, point_seed)?;
            out.push(SurfacePoint { rho, b, quantile: q.value });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_limit(d: usize) -> GaussianLimit {
        GaussianLimit::new(&Mat::identity(d), &Mat::identity(d), (0..d).collect()).unwrap()
    }

    #[test]
    fn identity_limit_caches_identity_weight() {
        let lim = unit_limit(2);
        assert_eq!(lim.weight()[(0, 0)], 1.0);
        assert_eq!(lim.weight()[(0, 1)], 0.0);
        assert_eq!(lim.selected_dim(), 2);
    }

    #[test]
    fn weight_is_inverse_of_selected_inverse_curvature_block() {
        // omega = [[2, 1], [1, 2]]; omega^{-1} = [[2/3, -1/3], [-1/3, 2/3]].
        // Selecting coordinate 0 alone: weight = 1 / (2/3) = 1.5.
        let omega = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let lim = GaussianLimit::new(&omega, &Mat::identity(2), vec![0]).unwrap();
        assert_relative_eq!(lim.weight()[(0, 0)], 1.5, max_relative = 1e-13);
    }

    #[test]
    fn boundary_test_statistic_is_positive_part_squared() {
        // One boundary-tested coordinate, no nuisance: the statistic equals
        // max(z, 0)^2 in the identity experiment.
        let lim = unit_limit(1);
        let cones = HypothesisCones::from_bounds(&[GammaKind::Boundary], &[], &[], 1e6).unwrap();
        assert_relative_eq!(
            draw_limit_stat(&lim, &cones, &[1.5]).unwrap(),
            2.25,
            max_relative = 1e-12
        );
        assert_eq!(draw_limit_stat(&lim, &cones, &[-2.0]).unwrap(), 0.0);
    }

    #[test]
    fn interior_test_statistic_is_z_squared() {
        let lim = unit_limit(1);
        let cones = HypothesisCones::from_bounds(&[GammaKind::Interior], &[], &[], 1e6).unwrap();
        assert_relative_eq!(
            draw_limit_stat(&lim, &cones, &[-2.0]).unwrap(),
            4.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn nuisance_bound_interpolates_between_known_laws() {
        // One tested and one nuisance coordinate, independent scores.
        // With b = 0 the nuisance is pinned in both cones and the statistic
        // reduces to the pure boundary case max(z0, 0)^2. The nuisance draw
        // must not matter.
        let lim = unit_limit(2);
        let cones =
            HypothesisCones::from_bounds(&[GammaKind::Boundary], &[0.0], &[0.0], 1e6).unwrap();
        let s = draw_limit_stat(&lim, &cones, &[1.2, -3.0]).unwrap();
        assert_relative_eq!(s, 1.44, max_relative = 1e-12);
    }

    #[test]
    fn huge_bounds_become_free_coordinates() {
        let cones = HypothesisCones::from_bounds(
            &[GammaKind::Boundary],
            &[f64::INFINITY],
            &[2e6],
            1e6,
        )
        .unwrap();
        assert_eq!(cones.null_cone().constraint(1), Constraint::Free);
        assert_eq!(cones.alt_cone().constraint(1), Constraint::Free);
        assert!(cones.is_nested());
    }

    #[test]
    fn negative_bounds_are_rejected() {
        assert!(HypothesisCones::from_bounds(&[GammaKind::Boundary], &[-0.1], &[1.0], 1e6)
            .is_err());
    }

    #[test]
    fn quantile_convention_picks_upper_order_statistic() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        // ceil(0.95 * 100) = 95th order statistic.
        assert_eq!(empirical_upper_quantile(&mut v, 0.95), 95.0);
        // ceil(0.951 * 100) = 96th.
        let mut v2: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_upper_quantile(&mut v2, 0.951), 96.0);
        // Order of input must not matter.
        let mut v3: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(empirical_upper_quantile(&mut v3, 0.95), 95.0);
    }

    #[test]
    fn simulated_quantile_is_reproducible_and_monotone_in_level() {
        let lim = unit_limit(2);
        let cones =
            HypothesisCones::from_bounds(&[GammaKind::Boundary], &[1.0], &[2.0], 1e6).unwrap();
        let a = simulate_limit_quantile(&lim, &cones, 0.9, 500, 7).unwrap();
        let b = simulate_limit_quantile(&lim, &cones, 0.9, 500, 7).unwrap();
        let c = simulate_limit_quantile(&lim, &cones, 0.95, 500, 7).unwrap();
        assert_eq!(a.value, b.value);
        assert!(c.value >= a.value, "quantile must be monotone in level on one sample");
        assert_eq!(a.draws, 500);
        assert_eq!(a.seed, 7);
    }

    #[test]
    fn level_and_draw_validation() {
        let lim = unit_limit(1);
        let cones = HypothesisCones::from_bounds(&[GammaKind::Boundary], &[], &[], 1e6).unwrap();
        assert!(matches!(
            simulate_limit_quantile(&lim, &cones, 1.0, 1000, 1),
            Err(Error::InvalidLevel { .. })
        ));
        assert!(matches!(
            simulate_limit_quantile(&lim, &cones, 0.95, 99, 1),
            Err(Error::InvalidLevel { .. })
        ));
    }

    #[test]
    fn max_abs_quantile_requires_unit_diagonal() {
        let bad = Mat::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.9]]).unwrap();
        assert!(matches!(
            max_abs_gaussian_quantile(&bad, 0.95, 1000, 1),
            Err(Error::NotACorrelationMatrix { index: 1, .. })
        ));
    }

    #[test]
    fn max_abs_quantile_median_of_scalar_normal() {
        // For one standard normal coordinate the 0.5 quantile of |Z| is the
        // interquartile point 0.6745 (known constant).
        let corr = Mat::identity(1);
        let q = max_abs_gaussian_quantile(&corr, 0.5, 200_000, 11).unwrap();
        assert_relative_eq!(q.value, 0.6745, epsilon = 0.01);
    }

    #[test]
    fn surface_is_reproducible_per_point() {
        let pts = quantile_surface(&[0.0, 0.5], &[0.0, 1.0], 0.95, 200, 3).unwrap();
        assert_eq!(pts.len(), 4);
        let again = quantile_surface(&[0.5], &[1.0], 0.95, 200, 3).unwrap();
        // Same grid coordinates mean same derived seed only when the row and
        // column indices agree, so recompute the full grid instead.
        let full = quantile_surface(&[0.0, 0.5], &[0.0, 1.0], 0.95, 200, 3).unwrap();
        assert_eq!(pts, full);
        assert_eq!(again.len(), 1);
    }

    #[test]
    fn surface_rejects_unit_correlation() {
        assert!(quantile_surface(&[1.0], &[0.0], 0.95, 200, 3).is_err());
    }
}
