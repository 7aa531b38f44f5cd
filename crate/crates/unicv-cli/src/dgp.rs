//! Data-generating processes for the simulation studies.
//!
//! Three families: a bivariate-normal regression with sign-constrained
//! coefficients, a conditionally heteroskedastic series whose variance loads
//! on two lognormal autoregressive covariates, and a four-covariate variant
//! whose covariates come from a Gaussian copula over gamma and chi-squared
//! marginals. All randomness flows from one seed through a dedicated
//! generation substream, so a (seed, replication) pair pins the data
//! bit-for-bit regardless of worker count.

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma, Normal};
use unicv::arch::{ArchData, ArchRoles};
use unicv::linalg::{Cholesky, Mat};
use unicv::regression::{ColumnRoles, RegressionData};
use unicv::rng::{SeedStreams, StreamDomain};

/// Autoregressive coefficient of the log-covariate process.
const LOG_AR_COEF: f64 = 0.9;
/// Stationary variance of each log covariate.
const LOG_AR_VARIANCE: f64 = 0.5;
/// Default burn-in for the recursive families.
const DEFAULT_BURN_IN: usize = 1_000;

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

/// One simulation design, serializable so studies can be configured from
/// JSON files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family")]
pub enum DgpSpec {
    /// `y = gamma * x1 + beta * x2 + e` with `(x1, x2)` standard bivariate
    /// normal with correlation `rho` and `e` standard normal, all i.i.d.
    RegressionGaussian { n: usize, rho: f64, gamma: f64, beta: f64 },
    /// `y_t = sigma_t * e_t` with
    /// `sigma_t^2 = delta1 + delta2 * y_{t-1}^2 + gamma * x_{t-1,1} + beta * x_{t-1,2}`,
    /// covariates `x = exp(v)` for a bivariate AR(1) `v` with coefficient
    /// 0.9, stationary variance 0.5, and innovation correlation `rho12`.
    ArchXLogAr {
        n: usize,
        rho12: f64,
        gamma: f64,
        beta: f64,
        delta1: f64,
        delta2: f64,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
    /// Four-covariate variant: unit-mean covariates drawn i.i.d. over time
    /// from a Gaussian copula over Gamma(3), Gamma(5), Gamma(10) (scale 10)
    /// and chi-squared(5) marginals;
    /// `sigma_t^2 = delta1 + delta2 * y_{t-1}^2 + gamma * x_{t-1,1} + beta1 * x_{t-1,2} + beta2 * x_{t-1,3} + beta3 * x_{t-1,4}`.
    ArchXGammaCopula {
        n: usize,
        gamma: f64,
        beta1: f64,
        beta2: f64,
        beta3: f64,
        delta1: f64,
        delta2: f64,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
}

/// A generated dataset together with the column roles its family tests.
pub enum GeneratedData {
    Regression { data: RegressionData, roles: ColumnRoles },
    Arch { data: ArchData, roles: ArchRoles },
}

impl DgpSpec {
    /// Validates parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            DgpSpec::RegressionGaussian { n, rho, gamma, beta } => {
                if !(rho > -1.0 && rho < 1.0) {
                    bail!("correlation must lie strictly inside (-1, 1), got {rho}");
                }
                if gamma < 0.0 || beta < 0.0 {
                    bail!("coefficients are sign-constrained: gamma {gamma}, beta {beta}");
                }
                if n < 3 {
                    bail!("need at least 3 observations, got {n}");
                }
            }
            DgpSpec::ArchXLogAr { n, rho12, gamma, beta, delta1, delta2, .. } => {
                if !(rho12 > -1.0 && rho12 < 1.0) {
                    bail!("correlation must lie strictly inside (-1, 1), got {rho12}");
                }
                if gamma < 0.0 || beta < 0.0 || delta2 < 0.0 {
                    bail!("variance loadings are sign-constrained");
                }
                if delta1.is_nan() || delta1 <= 0.0 {
                    bail!("the variance intercept must be positive, got {delta1}");
                }
                if delta2 >= 1.0 {
                    bail!("the squared-response coefficient must be below 1, got {delta2}");
                }
                if n < 5 {
                    bail!("need at least 5 observations, got {n}");
                }
            }
            DgpSpec::ArchXGammaCopula {
                n,
                gamma,
                beta1,
                beta2,
                beta3,
                delta1,
                delta2,
                ..
            } => {
                if gamma < 0.0 || beta1 < 0.0 || beta2 < 0.0 || beta3 < 0.0 || delta2 < 0.0 {
                    bail!("variance loadings are sign-constrained");
                }
                if delta1.is_nan() || delta1 <= 0.0 {
                    bail!("the variance intercept must be positive, got {delta1}");
                }
                if delta2 >= 1.0 {
                    bail!("the squared-response coefficient must be below 1, got {delta2}");
                }
                if n < 8 {
                    bail!("need at least 8 observations, got {n}");
                }
            }
        }
        Ok(())
    }

    /// Generates the dataset for this design from the given seed.
    pub fn generate(&self, seed: u64) -> Result<GeneratedData> {
        self.validate()?;
        let mut rng = SeedStreams::new(seed).stream(StreamDomain::DataGen, 0);
        match *self {
            DgpSpec::RegressionGaussian { n, rho, gamma, beta } => {
                let spread = (1.0 - rho * rho).sqrt();
                let mut y = Vec::with_capacity(n);
                let mut x = Mat::zeros(n, 2);
                for t in 0..n {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(StandardNormal);
                    let x1 = z1;
                    let x2 = rho * z1 + spread * z2;
                    x[(t, 0)] = x1;
                    x[(t, 1)] = x2;
                    y.push(gamma * x1 + beta * x2 + e);
                }
                let data = RegressionData::new(y, x).context("building regression data")?;
                let roles = ColumnRoles { gamma: vec![0], beta: vec![1] };
                Ok(GeneratedData::Regression { data, roles })
            }
            DgpSpec::ArchXLogAr { n, rho12, gamma, beta, delta1, delta2, burn_in } => {
                let loadings = [gamma, beta];
                let (y, x, presample_y2) = simulate_recursion(
                    &mut rng,
                    n,
                    burn_in,
                    &loadings,
                    delta1,
                    delta2,
                    &mut LogArCovariates::new(rho12),
                );
                let data = ArchData::new(y, x, 1, vec![presample_y2])
                    .context("building volatility data")?;
                let roles = ArchRoles { gamma: vec![0], beta: vec![1] };
                Ok(GeneratedData::Arch { data, roles })
            }
            DgpSpec::ArchXGammaCopula {
                n,
                gamma,
                beta1,
                beta2,
                beta3,
                delta1,
                delta2,
                burn_in,
            } => {
                let loadings = [gamma, beta1, beta2, beta3];
                let (y, x, presample_y2) = simulate_recursion(
                    &mut rng,
                    n,
                    burn_in,
                    &loadings,
                    delta1,
                    delta2,
                    &mut CopulaCovariates::new(),
                );
                let data = ArchData::new(y, x, 1, vec![presample_y2])
                    .context("building volatility data")?;
                let roles = ArchRoles { gamma: vec![0], beta: vec![1, 2, 3] };
                Ok(GeneratedData::Arch { data, roles })
            }
        }
    }
}

/// A stationary covariate process the variance recursion can draw from.
trait CovariateProcess {
    fn dim(&self) -> usize;
    fn next(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// Exponentials of a bivariate AR(1) with stationary variance 0.5 and
/// innovation correlation `rho12`.
struct LogArCovariates {
    rho12: f64,
    state: [f64; 2],
}

impl LogArCovariates {
    fn new(rho12: f64) -> Self {
        LogArCovariates { rho12, state: [0.0, 0.0] }
    }
}

impl CovariateProcess for LogArCovariates {
    fn dim(&self) -> usize {
        2
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let sd = (LOG_AR_VARIANCE * (1.0 - LOG_AR_COEF * LOG_AR_COEF)).sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let e1 = sd * z1;
        let e2 = sd * (self.rho12 * z1 + (1.0 - self.rho12 * self.rho12).sqrt() * z2);
        self.state[0] = LOG_AR_COEF * self.state[0] + e1;
        self.state[1] = LOG_AR_COEF * self.state[1] + e2;
        vec![self.state[0].exp(), self.state[1].exp()]
    }
}

/// Unit-mean covariates from a Gaussian copula over Gamma(3), Gamma(5),
/// Gamma(10) (scale 10) and chi-squared(5) marginals, i.i.d. over time.
struct CopulaCovariates {
    chol: Cholesky,
    std_normal: Normal,
    gammas: [Gamma; 3],
    chi: ChiSquared,
    /// Theoretical means of the raw marginals, in order.
    means: [f64; 4],
}

impl CopulaCovariates {
    fn new() -> Self {
        let sigma = copula_correlation();
        let chol = Cholesky::new(&sigma, "copula correlation").expect("fixed matrix is PD");
        // The gamma marginals use scale 10 (the library is rate-based, so
        // rate 0.1); their means are shape * 10.
        let shapes = [3.0, 5.0, 10.0];
        let gammas = [
            Gamma::new(shapes[0], 0.1).unwrap(),
            Gamma::new(shapes[1], 0.1).unwrap(),
            Gamma::new(shapes[2], 0.1).unwrap(),
        ];
        let chi = ChiSquared::new(5.0).unwrap();
        let means = [30.0, 50.0, 100.0, 5.0];
        CopulaCovariates {
            chol,
            std_normal: Normal::new(0.0, 1.0).unwrap(),
            gammas,
            chi,
            means,
        }
    }
}

/// The fixed copula correlation matrix (unit diagonal, completed by
/// symmetry from its lower triangle).
fn copula_correlation() -> Mat {
    Mat::from_rows(&[
        vec![1.0, -0.75, -2.0 / 3.0, -0.1],
        vec![-0.75, 1.0, 0.4, 0.15],
        vec![-2.0 / 3.0, 0.4, 1.0, 0.35],
        vec![-0.1, 0.15, 0.35, 1.0],
    ])
    .expect("fixed matrix is well formed")
}

impl CovariateProcess for CopulaCovariates {
    fn dim(&self) -> usize {
        4
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let z = self.chol.transform(&u);
        (0..4)
            .map(|i| {
                let p = self.std_normal.cdf(z[i]).clamp(1e-16, 1.0 - 1e-16);
                let raw = if i < 3 {
                    self.gammas[i].inverse_cdf(p)
                } else {
                    self.chi.inverse_cdf(p)
                };
                raw / self.means[i]
            })
            .collect()
    }
}

/// Runs the variance recursion over a burn-in plus `n` kept observations.
///
/// Covariates enter the variance one period lagged, so the returned
/// covariate matrix holds, in row `t`, the values dated `t - 1`; the lagged
/// squared response is handled by the model itself through the returned
/// presample value (the last burn-in observation, squared).
fn simulate_recursion(
    rng: &mut ChaCha8Rng,
    n: usize,
    burn_in: usize,
    loadings: &[f64],
    delta1: f64,
    delta2: f64,
    process: &mut dyn CovariateProcess,
) -> (Vec<f64>, Mat, f64) {
    let p = process.dim();
    debug_assert_eq!(loadings.len(), p);
    let burn = burn_in.max(1);
    let total = burn + n + 1;
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut ys: Vec<f64> = Vec::with_capacity(total);
    for t in 0..total {
        let x_t = process.next(rng);
        let s2 = if t == 0 {
            delta1 / (1.0 - delta2).max(1e-3)
        } else {
            let mut s = delta1 + delta2 * ys[t - 1] * ys[t - 1];
            for i in 0..p {
                s += loadings[i] * xs[t - 1][i];
            }
            s
        };
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(s2.sqrt() * eps);
        xs.push(x_t);
    }
    let first = burn + 1;
    let y: Vec<f64> = ys[first..].to_vec();
    let x = Mat::from_fn(n, p, |t, i| xs[first + t - 1][i]);
    let presample_y2 = ys[burn] * ys[burn];
    (y, x, presample_y2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut caa = 0.0;
        let mut cbb = 0.0;
        let mut cab = 0.0;
        for (x, y) in a.iter().zip(b) {
            caa += (x - ma) * (x - ma);
            cbb += (y - mb) * (y - mb);
            cab += (x - ma) * (y - mb);
        }
        cab / (caa * cbb).sqrt()
    }

    #[test]
    fn regression_correlation_matches_the_design() {
        let n = 4_000;
        let spec = DgpSpec::RegressionGaussian { n, rho: 0.6, gamma: 0.0, beta: 0.0 };
        let GeneratedData::Regression { data, roles } = spec.generate(5).unwrap() else {
            panic!("wrong family");
        };
        let x1: Vec<f64> = (0..n).map(|t| data.x()[(t, 0)]).collect();
        let x2: Vec<f64> = (0..n).map(|t| data.x()[(t, 1)]).collect();
        let r = sample_corr(&x1, &x2);
        assert!((r - 0.6).abs() <= 3.0 / (n as f64).sqrt(), "sample correlation {r}");
        assert_eq!(roles.gamma, vec![0]);
        assert_eq!(roles.beta, vec![1]);
    }

    #[test]
    fn regression_signal_plus_noise_decomposition() {
        let n = 4_000;
        let spec = DgpSpec::RegressionGaussian { n, rho: -0.3, gamma: 2.0, beta: 3.0 };
        let GeneratedData::Regression { data, .. } = spec.generate(6).unwrap() else {
            panic!("wrong family");
        };
        // Removing the known signal leaves unit-variance noise.
        let resid_var = (0..n)
            .map(|t| {
                let e = data.y()[t] - 2.0 * data.x()[(t, 0)] - 3.0 * data.x()[(t, 1)];
                e * e
            })
            .sum::<f64>()
            / n as f64;
        assert!((resid_var - 1.0).abs() <= 0.1, "residual variance {resid_var}");
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let spec = DgpSpec::ArchXLogAr {
            n: 50,
            rho12: -0.5,
            gamma: 0.1,
            beta: 0.05,
            delta1: 0.3,
            delta2: 0.3,
            burn_in: 100,
        };
        let GeneratedData::Arch { data: a, .. } = spec.generate(9).unwrap() else {
            panic!()
        };
        let GeneratedData::Arch { data: b, .. } = spec.generate(9).unwrap() else {
            panic!()
        };
        assert_eq!(a.y(), b.y());
        assert_eq!(a.regressor_matrix(), b.regressor_matrix());
        let GeneratedData::Arch { data: c, .. } = spec.generate(10).unwrap() else {
            panic!()
        };
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn log_ar_covariates_are_positive_with_the_stationary_log_variance() {
        let n = 200_000;
        let spec = DgpSpec::ArchXLogAr {
            n,
            rho12: 0.4,
            gamma: 0.0,
            beta: 0.0,
            delta1: 0.5,
            delta2: 0.2,
            burn_in: 1_000,
        };
        let GeneratedData::Arch { data, .. } = spec.generate(11).unwrap() else {
            panic!()
        };
        let x = data.regressor_matrix();
        let logs: Vec<f64> = (0..n).map(|t| {
            assert!(x[(t, 0)] > 0.0);
            x[(t, 0)].ln()
        }).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 0.5).abs() <= 0.03, "log-covariate variance {var}");
    }

    #[test]
    fn long_run_squared_response_matches_the_unconditional_variance() {
        let n = 1_000_000;
        let (gamma, beta, delta1, delta2) = (0.1, 0.05, 0.4, 0.3);
        let spec =
            DgpSpec::ArchXLogAr { n, rho12: 0.0, gamma, beta, delta1, delta2, burn_in: 1_000 };
        let GeneratedData::Arch { data, .. } = spec.generate(13).unwrap() else {
            panic!()
        };
        let mean_y2 = data.y().iter().map(|v| v * v).sum::<f64>() / n as f64;
        // E x_i = exp(variance/2) for a lognormal with zero log-mean.
        let ex = (0.5f64 / 2.0).exp();
        let theoretical = (delta1 + (gamma + beta) * ex) / (1.0 - delta2);
        assert!(
            (mean_y2 - theoretical).abs() <= 0.02 * theoretical,
            "mean squared response {mean_y2} vs theoretical {theoretical}"
        );
    }

    #[test]
    fn copula_covariates_have_unit_means_and_the_right_dependence_sign() {
        let n = 20_000;
        let spec = DgpSpec::ArchXGammaCopula {
            n,
            gamma: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            delta1: 0.5,
            delta2: 0.2,
            burn_in: 100,
        };
        let GeneratedData::Arch { data, roles } = spec.generate(17).unwrap() else {
            panic!()
        };
        assert_eq!(roles.beta, vec![1, 2, 3]);
        let x = data.regressor_matrix();
        // Coefficients of variation of the raw marginals.
        let sds = [
            1.0 / 3.0f64.sqrt(),
            1.0 / 5.0f64.sqrt(),
            1.0 / 10.0f64.sqrt(),
            (10.0f64).sqrt() / 5.0,
        ];
        for (i, sd) in sds.iter().enumerate() {
            let mean = (0..n).map(|t| x[(t, i)]).sum::<f64>() / n as f64;
            assert!(
                (mean - 1.0).abs() <= 3.0 * sd / (n as f64).sqrt(),
                "covariate {i} mean {mean}"
            );
        }
        // The first pair is strongly negatively dependent by construction.
        let a: Vec<f64> = (0..n).map(|t| x[(t, 0)]).collect();
        let b: Vec<f64> = (0..n).map(|t| x[(t, 1)]).collect();
        assert!(sample_corr(&a, &b) < -0.5);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DgpSpec::RegressionGaussian { n: 100, rho: 1.0, gamma: 0.0, beta: 0.0 }
            .validate()
            .is_err());
        assert!(DgpSpec::ArchXLogAr {
            n: 100,
            rho12: 0.0,
            gamma: 0.0,
            beta: 0.0,
            delta1: 0.0,
            delta2: 0.2,
            burn_in: 10
        }
        .validate()
        .is_err());
        assert!(DgpSpec::ArchXGammaCopula {
            n: 100,
            gamma: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            delta1: 0.5,
            delta2: 1.0,
            burn_in: 10
        }
        .validate()
        .is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = DgpSpec::ArchXLogAr {
            n: 1000,
            rho12: -0.95,
            gamma: 0.0,
            beta: 0.1,
            delta1: 0.4,
            delta2: 0.3,
            burn_in: 1_000,
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: DgpSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
