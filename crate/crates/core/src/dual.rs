//! The dual (pricing) measure `Q`: under `Q` the increments are centered
//! Gaussian with covariance `sigma^2 A^{-1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiscreteMarket;
use crate::solver::{evaluate_on_path, solve, StrategyWeights};
use crate::toeplitz::{
    build_a, check_banded, cholesky_log_det, inverse_via_v, log_det_closed_form, DenseMatrix,
    SymToeplitz,
};

/// `Normal(mean, covariance)` law of the increment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    pub mean: Vec<f64>,
    pub covariance: DenseMatrix,
}

impl GaussianLaw {
    /// The market measure: i.i.d. `Normal(mu, sigma^2)` increments.
    pub fn market(m: &DiscreteMarket) -> Self {
        GaussianLaw {
            mean: vec![m.mu; m.n],
            covariance: DenseMatrix::identity(m.n).scaled(m.sigma2()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// The optimal dual measure together with `C_hat`, where `-exp(-C_hat)` is
/// the optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMeasure {
    pub law: GaussianLaw,
    pub c_hat: f64,
}

/// `Q` with covariance `sigma^2 A^{-1}` and
/// `C_hat = n (mu^2 - a sigma_hat^2) / (2 sigma^2) + log|A| / 2`.
pub fn build_dual(m: &DiscreteMarket) -> Result<DualMeasure> {
    let sol = solve(m)?;
    let cov = inverse_via_v(sol.a, m.delay, m.n)?.scaled(m.sigma2());
    let n = m.n as f64;
    let c_hat = n * (m.mu * m.mu - sol.a * m.sigma_hat2()) / (2.0 * m.sigma2())
        + 0.5 * log_det_closed_form(sol.a, m.delay, m.n)?;
    Ok(DualMeasure {
        law: GaussianLaw {
            mean: vec![0.0; m.n],
            covariance: cov,
        },
        c_hat,
    })
}

/// Centered increments that are uncorrelated beyond lag `delay`, which for a
/// Gaussian law is the martingale property under `delay`-step information lag.
pub fn check_delayed_martingale(law: &GaussianLaw, delay: usize, tol: f64) -> bool {
    let scale = law.covariance.max_abs().sqrt().max(1.0);
    law.mean.iter().all(|x| x.abs() <= tol * scale)
        && check_banded(&law.covariance, delay, tol * law.covariance.max_abs().max(1.0))
}

/// `S_n - S_0` has law `Normal(0, n sigma_hat^2)` (relative tolerance).
pub fn check_marginal(law: &GaussianLaw, m: &DiscreteMarket, tol: f64) -> bool {
    let target = m.n as f64 * m.sigma_hat2();
    let mean: f64 = law.mean.iter().sum();
    let var = law.covariance.sum();
    (var - target).abs() <= tol * target && mean.abs() <= tol * target.sqrt()
}

/// `KL(law || P)` between Gaussians, with `log det` taken from a Cholesky
/// factorization of the covariance.
pub fn relative_entropy(law: &GaussianLaw, m: &DiscreteMarket) -> Result<f64> {
    if law.dim() != m.n || law.covariance.dim() != m.n {
        return Err(Error::LengthMismatch {
            expected: m.n,
            got: law.dim(),
        });
    }
    let s2 = m.sigma2();
    let n = m.n as f64;
    let log_det = cholesky_log_det(&law.covariance)
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let drift: f64 = law.mean.iter().map(|x| (x - m.mu).powi(2)).sum();
    Ok(0.5 * (law.covariance.trace() / s2 + drift / s2 - n + n * s2.ln() - log_det))
}

/// Precomputed pieces of the pathwise duality identity
/// `V(x) + log dQ/dP(x) = C_hat`.
#[derive(Debug, Clone)]
pub struct DualityCheck {
    market: DiscreteMarket,
    weights: StrategyWeights,
    a: SymToeplitz,
    half_log_det: f64,
    c_hat: f64,
}

impl DualityCheck {
    pub fn new(m: &DiscreteMarket) -> Result<Self> {
        let sol = solve(m)?;
        let half_log_det = 0.5 * log_det_closed_form(sol.a, m.delay, m.n)?;
        let n = m.n as f64;
        Ok(DualityCheck {
            market: *m,
            weights: StrategyWeights::from_solution(&sol, m),
            a: build_a(&sol, m.n)?,
            half_log_det,
            c_hat: n * (m.mu * m.mu - sol.a * m.sigma_hat2()) / (2.0 * m.sigma2())
                + half_log_det,
        })
    }

    pub fn c_hat(&self) -> f64 {
        self.c_hat
    }

    /// `log dQ/dP(x) = -x^T A x/(2 sigma^2) + log|A|/2 + |x - mu 1|^2/(2 sigma^2)`.
    pub fn log_density_ratio(&self, x: &[f64]) -> f64 {
        let s2 = self.market.sigma2();
        let dev: f64 = x.iter().map(|v| (v - self.market.mu).powi(2)).sum();
        -self.a.quad_form(x) / (2.0 * s2) + self.half_log_det + dev / (2.0 * s2)
    }

    /// `V(x) + log dQ/dP(x) - C_hat`, zero for every path.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let v = evaluate_on_path(&self.weights, &self.market, x)?.terminal_value;
        Ok(v + self.log_density_ratio(x) - self.c_hat)
    }
}

/// `V(x) + log dQ/dP(x) - C_hat` for a single path.
pub fn verification_residual(m: &DiscreteMarket, x: &[f64]) -> Result<f64> {
    DualityCheck::new(m)?.residual(x)
}

/// Summary of the duality checks for one market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    pub c_hat: f64,
    pub relative_entropy: f64,
    pub value: f64,
    pub delayed_martingale: bool,
    pub marginal: bool,
}

pub fn dual_report(m: &DiscreteMarket, tol: f64) -> Result<DualReport> {
    let dm = build_dual(m)?;
    let sol = solve(m)?;
    Ok(DualReport {
        c_hat: dm.c_hat,
        relative_entropy: relative_entropy(&dm.law, m)?,
        value: sol.value,
        delayed_martingale: check_delayed_martingale(&dm.law, m.delay, tol),
        marginal: check_marginal(&dm.law, m, tol),
    })
}
