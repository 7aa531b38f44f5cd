//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the numerical routines in this crate.
///
/// Every variant carries enough context to diagnose the failure without
/// re-running the computation; seeds and dimensions are included where they
/// matter for reproducing the problem.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two inputs that must agree in dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Short description of the operation that failed.
        context: &'static str,
        /// Dimension required by the other operand(s).
        expected: usize,
        /// Dimension actually supplied.
        got: usize,
    },

    /// A matrix required to be symmetric positive definite failed its
    /// Cholesky factorization (or the symmetry pre-check).
    #[error("matrix is not symmetric positive definite: {context}")]
    NotPositiveDefinite {
        /// Short description of which matrix was rejected.
        context: &'static str,
    },

    /// A constraint bound was NaN or +inf, which describes an empty or
    /// ill-posed feasible set.
    #[error("constraint bound must be finite or -inf, got {value}")]
    InvalidBound {
        /// The offending bound.
        value: f64,
    },

    /// The active-set solver exceeded its pivot budget.
    #[error("active-set solver exceeded {max_iterations} pivots (dimension {dim})")]
    MaxIterationsExceeded {
        /// Pivot budget that was exhausted.
        max_iterations: usize,
        /// Problem dimension.
        dim: usize,
    },

    /// A probability level outside the open unit interval, or a draw count
    /// too small to estimate the requested quantile.
    #[error("invalid simulation request: level {level}, draws {draws}")]
    InvalidLevel {
        /// Requested quantile level.
        level: f64,
        /// Requested number of draws.
        draws: usize,
    },

    /// A matrix passed where a correlation matrix is required has a diagonal
    /// entry away from one.
    #[error("not a correlation matrix: diagonal entry {index} is {value}")]
    NotACorrelationMatrix {
        /// Index of the offending diagonal entry.
        index: usize,
        /// Its value.
        value: f64,
    },

    /// A covariance matrix has a zero or negative diagonal entry, so it
    /// cannot be rescaled to a correlation matrix.
    #[error("covariance diagonal entry {index} is {value}, must be positive")]
    NonPositiveDiagonal {
        /// Index of the offending diagonal entry.
        index: usize,
        /// Its value.
        value: f64,
    },

    /// The auxiliary confidence level must sit strictly inside (0, alpha).
    #[error("eta must lie in (0, alpha): eta={eta}, alpha={alpha}")]
    InvalidEtaAlpha {
        /// Supplied auxiliary level.
        eta: f64,
        /// Supplied test level.
        alpha: f64,
    },

    /// The regression design has linearly dependent columns (or too few
    /// rows), so the Gram matrix cannot be inverted.
    #[error("singular design matrix: {context}")]
    SingularDesign {
        /// Short description of the failure.
        context: &'static str,
    },

    /// A volatility-model parameter produced a non-positive conditional
    /// variance for some observation.
    #[error("infeasible parameter: conditional variance {value} at observation {index}")]
    InfeasibleTheta {
        /// First observation with a non-positive variance.
        index: usize,
        /// The offending variance value.
        value: f64,
    },

    /// The quasi-likelihood optimizer failed to reach its tolerance from any
    /// starting point.
    #[error("optimizer did not converge: best projected-gradient norm {gradient_norm} after {iterations} iterations")]
    NonConvergence {
        /// Iterations used by the best run.
        iterations: usize,
        /// Scaled projected-gradient norm at the best point found.
        gradient_norm: f64,
    },

    /// The Hessian of the log-likelihood is numerically singular, so the
    /// one-step update and sandwich covariance are unavailable.
    #[error("singular Hessian: {context}")]
    SingularHessian {
        /// Short description of the operation that needed the inverse.
        context: &'static str,
    },

    /// Two hypothesis cones that must be nested (null inside alternative)
    /// are not, or a simulated statistic came out impossibly negative.
    #[error("internal consistency failure: {context}")]
    InternalConsistency {
        /// Description of the violated invariant.
        context: &'static str,
    },

    /// A model front-end was configured in a way that cannot describe a
    /// boundary test (e.g. no tested parameters at all).
    #[error("invalid configuration: {context}")]
    InvalidConfiguration {
        /// Description of the configuration problem.
        context: String,
    },
}
