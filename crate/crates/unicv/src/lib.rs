//! Uniformly valid critical values for likelihood-ratio tests whose
//! nuisance parameters may lie on or near the boundary of the parameter
//! space.
//!
//! Pointwise asymptotics break down when a nonnegative nuisance coefficient
//! is at (or drifting toward) zero: the usual fixed critical value can
//! badly over-reject. The construction implemented here restores uniform
//! validity in two moves. A simultaneous confidence bracket for the scaled
//! nuisance block is built from an unconstrained (one-step) estimator,
//! spending a small slice `eta` of the test level; then the critical value
//! is taken from the worst case of the limit distribution over that
//! bracket, which a monotonicity property reduces to a single simulated
//! cone-pair quantile at level `1 - alpha + eta`.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: small dense matrices, Cholesky and LU factorizations;
//! * [`rng`]: one master seed fanned out into independent, thread-safe
//!   substreams;
//! * [`cone`] and [`qp`]: constraint cones and the active-set projection
//!   solver;
//! * [`limit`]: the Gaussian limit experiment, cone pairs, and simulated
//!   quantiles;
//! * [`cv`]: the critical-value engine (bracket, worst-case quantile,
//!   decision);
//! * [`regression`]: sign-constrained linear regression front-end;
//! * [`arch`]: ARCH-X volatility model front-end.
//!
//! # Example
//!
//! Test whether a nonnegative regression coefficient is zero while another
//! nonnegative coefficient (the nuisance) may itself sit at zero:
//!
//! ```
//! use unicv::linalg::Mat;
//! use unicv::regression::{regression_test, ColumnRoles, RegressionData, RegressionTestConfig};
//!
//! // y regressed on two nonnegative-coefficient columns and an intercept,
//! // with a deterministic stand-in for noise.
//! let x = Mat::from_fn(40, 3, |t, j| match j {
//!     0 => (t % 5) as f64,
//!     1 => (t % 3) as f64,
//!     _ => 1.0,
//! });
//! let y: Vec<f64> = (0..40)
//!     .map(|t| 0.5 * ((t % 5) as f64) + 0.1 + 0.3 * (t as f64).sin())
//!     .collect();
//! let data = RegressionData::new(y, x).unwrap();
//! let roles = ColumnRoles { gamma: vec![0], beta: vec![1] };
//! let outcome = regression_test(&data, &roles, &RegressionTestConfig::new(7)).unwrap();
//! assert!(outcome.cv.critical_value > 0.0);
//! ```

pub mod arch;
pub mod cone;
pub mod cv;
pub mod error;
pub mod limit;
pub mod linalg;
pub mod qp;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};

/// Library version, for run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
