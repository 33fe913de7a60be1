//! Monte Carlo estimates of expected utility `E[-exp(-V)]`, plus the exact
//! Gaussian integral for quadratic `V`.
//!
//! Path `p` of a batch draws from its own ChaCha8 stream, so results do not
//! depend on the thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::error::{domain, Error, Result};
use crate::model::DiscreteMarket;
use crate::solver::{evaluate_on_path, QuadraticForm, StrategyWeights};
use crate::toeplitz::DenseMatrix;

/// Identifier of the path generator, bumped whenever its output changes.
pub const GENERATOR: &str = "chacha8-stream-per-path/v1";

/// `count` paths of `n` increments, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub increments: Vec<f64>,
}

impl PathBatch {
    pub fn path(&self, p: usize) -> &[f64] {
        &self.increments[p * self.n..(p + 1) * self.n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.increments.chunks_exact(self.n)
    }
}

/// Standard normal quantile.
fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
fn open_uniform(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws i.i.d. `Normal(mu, sigma^2)` increments under the market measure.
pub fn generate(m: &DiscreteMarket, count: usize, seed: u64) -> Result<PathBatch> {
    if count == 0 {
        return domain("path count must be at least 1");
    }
    let n = m.n;
    let mut increments = vec![0.0; n * count];
    increments
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(p, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            for x in row.iter_mut() {
                *x = m.mu + m.sigma * normal_quantile(open_uniform(rng.next_u64()));
            }
        });
    Ok(PathBatch {
        n,
        count,
        seed,
        increments,
    })
}

/// Sum with a fixed pairwise tree, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (l, r) = xs.split_at(xs.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub empirical_mean: f64,
    pub std_error: f64,
    /// Exact `E[-exp(-V)]` when the Gaussian integral converges.
    pub analytic: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub generator: &'static str,
    /// `(sum w)^2 / sum w^2` for the weights `w = exp(-V)`.
    pub effective_sample_size: f64,
}

/// Monte Carlo mean of `-exp(-V)` for strategy `w` over `batch`.
pub fn estimate_utility(
    batch: &PathBatch,
    w: &StrategyWeights,
    m: &DiscreteMarket,
) -> Result<UtilityReport> {
    if batch.n != m.n {
        return Err(Error::LengthMismatch {
            expected: m.n,
            got: batch.n,
        });
    }
    let weights: Vec<f64> = batch
        .increments
        .par_chunks(batch.n)
        .map(|x| evaluate_on_path(w, m, x).map(|e| (-e.terminal_value).exp()))
        .collect::<Result<_>>()?;
    let count = batch.count as f64;
    let mean_w = pairwise_sum(&weights) / count;
    let dev: Vec<f64> = weights.iter().map(|x| (x - mean_w).powi(2)).collect();
    let var = if batch.count > 1 {
        pairwise_sum(&dev) / (count - 1.0)
    } else {
        0.0
    };
    let squares: Vec<f64> = weights.iter().map(|x| x * x).collect();
    let total = mean_w * count;
    Ok(UtilityReport {
        empirical_mean: -mean_w,
        std_error: (var / count).sqrt(),
        analytic: analytic_quadratic_utility(&w.quadratic_form(m), m).ok(),
        n_paths: batch.count,
        seed: batch.seed,
        generator: GENERATOR,
        effective_sample_size: total * total / pairwise_sum(&squares),
    })
}

/// `log E_P[exp(-V)]` for `V(x) = x^T Q x / 2 + l . x + c` and
/// `x ~ Normal(mu 1, sigma^2 I)`:
///
/// `-log|I + sigma^2 Q| / 2 + sigma^2 h^T (I + sigma^2 Q)^{-1} h / 2 - n mu^2/(2 sigma^2) - c`
/// with `h = mu 1 / sigma^2 - l`. Fails unless `I + sigma^2 Q` is positive definite.
pub fn log_exponential_moment(form: &QuadraticForm, m: &DiscreteMarket) -> Result<f64> {
    let n = m.n;
    if form.q.dim() != n || form.linear.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: form.linear.len(),
        });
    }
    let s2 = m.sigma2();
    let mut big = form.q.scaled(s2);
    for i in 0..n {
        big.set(i, i, big.get(i, i) + 1.0);
    }
    let chol = big.into_matrix().cholesky().ok_or_else(|| {
        Error::Integrability("I + sigma^2 Q is not positive definite".into())
    })?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let h = nalgebra::DVector::from_iterator(n, form.linear.iter().map(|l| m.mu / s2 - l));
    let y = chol.solve(&h);
    Ok(-0.5 * log_det + 0.5 * s2 * h.dot(&y) - n as f64 * m.mu * m.mu / (2.0 * s2) - form.constant)
}

/// Exact `E_P[-exp(-V)]` for quadratic `V`.
pub fn analytic_quadratic_utility(form: &QuadraticForm, m: &DiscreteMarket) -> Result<f64> {
    Ok(-log_exponential_moment(form, m)?.exp())
}

/// `E_P[-exp(-V)]` for a strategy, exactly.
pub fn strategy_utility(w: &StrategyWeights, m: &DiscreteMarket) -> Result<f64> {
    analytic_quadratic_utility(&w.quadratic_form(m), m)
}

/// Sample covariance of a batch, for diagnostics.
pub fn sample_covariance(batch: &PathBatch) -> DenseMatrix {
    let n = batch.n;
    let count = batch.count as f64;
    let means: Vec<f64> = (0..n)
        .map(|i| batch.paths().map(|x| x[i]).sum::<f64>() / count)
        .collect();
    DenseMatrix::from_fn(n, |i, j| {
        batch
            .paths()
            .map(|x| (x[i] - means[i]) * (x[j] - means[j]))
            .sum::<f64>()
            / (count - 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, strategy};

    fn market(n: usize, d: usize, mu: f64, s: f64, sh: f64) -> DiscreteMarket {
        DiscreteMarket::new(n, d, mu, s, sh).unwrap()
    }

    #[test]
    fn quantile_is_symmetric() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((normal_quantile(0.1) + normal_quantile(0.9)).abs() < 1e-14);
    }

    #[test]
    fn same_seed_same_paths() {
        let m = market(3, 1, 0.1, 1.0, 1.0);
        let a = generate(&m, 50, 7).unwrap();
        let b = generate(&m, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&m, 50, 8).unwrap());
        // A longer batch extends a shorter one.
        let c = generate(&m, 80, 7).unwrap();
        assert_eq!(&c.increments[..150], &a.increments[..]);
        assert!(generate(&m, 0, 7).is_err());
    }

    #[test]
    fn sample_moments() {
        let m = market(4, 1, 0.3, 2.0, 1.0);
        let batch = generate(&m, 40_000, 3).unwrap();
        let mean = pairwise_sum(&batch.increments) / batch.increments.len() as f64;
        assert!((mean - 0.3).abs() < 0.03);
        let cov = sample_covariance(&batch);
        assert!((cov.get(2, 2) - 4.0).abs() < 0.15);
        assert!(cov.get(0, 3).abs() < 0.15);
    }

    #[test]
    fn analytic_utility_of_optimum_is_the_value() {
        let m = market(6, 2, 0.1, 1.0, 1.3);
        let sol = solve(&m).unwrap();
        let u = strategy_utility(&strategy(&m).unwrap(), &m).unwrap();
        assert!((u - sol.value).abs() < 1e-12, "{u} vs {}", sol.value);
    }

    #[test]
    fn zero_strategy_has_utility_minus_one() {
        let m = market(4, 1, 0.2, 1.0, 1.0);
        let u = strategy_utility(&StrategyWeights::zero(4), &m).unwrap();
        assert!((u + 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_integrable_form_is_rejected() {
        let m = market(3, 0, 0.0, 1.0, 1.0);
        let mut w = StrategyWeights::zero(3);
        w.static_coeff = -1.0;
        assert!(matches!(
            strategy_utility(&w, &m),
            Err(Error::Integrability(_))
        ));
    }

    #[test]
    fn estimate_tracks_analytic() {
        let m = market(5, 2, 0.1, 1.0, 1.3);
        let w = strategy(&m).unwrap();
        let batch = generate(&m, 20_000, 1).unwrap();
        let r = estimate_utility(&batch, &w, &m).unwrap();
        let exact = r.analytic.unwrap();
        assert!((r.empirical_mean - exact).abs() < 5.0 * r.std_error);
        assert!(r.effective_sample_size > 1000.0);
    }
}
