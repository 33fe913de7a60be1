//! Closed-form optimal semistatic strategy for the delayed discrete market.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_discrete, DiscreteMarket, HedgeSolution};
use crate::toeplitz::{log_det_closed_form, DenseMatrix};

/// Negative discriminants down to `-DISCRIMINANT_CLAMP * max(1, qb^2)` are
/// treated as rounding noise and clamped to zero.
pub const DISCRIMINANT_CLAMP: f64 = 1e-12;

/// Coefficients of `qa z^2 + qb z + qc = 0`, whose largest root is `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticCoeffs {
    pub qa: f64,
    pub qb: f64,
    pub qc: f64,
}

impl QuadraticCoeffs {
    pub fn new(m: &DiscreteMarket) -> Self {
        let d = m.delay as f64;
        let r = m.variance_ratio();
        QuadraticCoeffs {
            qa: d * (d + 1.0),
            qb: 2.0 * d + 1.0 - d * (d + 1.0) * r / m.n as f64,
            qc: 1.0 - r,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.qa * z + self.qb) * z + self.qc
    }

    pub fn discriminant(&self) -> f64 {
        self.qb * self.qb - 4.0 * self.qa * self.qc
    }

    /// `|eval(z)| / max(|qa|, |qb|, |qc|)`.
    pub fn relative_residual(&self, z: f64) -> f64 {
        let scale = self.qa.abs().max(self.qb.abs()).max(self.qc.abs());
        self.eval(z).abs() / scale
    }
}

/// The root `a`. Without delay `a = sigma^2/sigma_hat^2 - 1`; with delay it
/// is the explicit largest root of the quadratic, and `a = 0` whenever
/// `sigma = sigma_hat`.
pub fn solve_a(m: &DiscreteMarket) -> Result<f64> {
    let m = validate_discrete(*m)?;
    let r = m.variance_ratio();
    if m.delay == 0 {
        return Ok(r - 1.0);
    }
    if m.sigma == m.sigma_hat {
        return Ok(0.0);
    }
    let q = QuadraticCoeffs::new(&m);
    let mut disc = q.discriminant();
    if disc < 0.0 {
        if disc < -DISCRIMINANT_CLAMP * q.qb.powi(2).max(1.0) {
            return Err(Error::Numerical(format!(
                "negative discriminant {disc} for {m:?}"
            )));
        }
        disc = 0.0;
    }
    let d = m.delay as f64;
    let a = r / (2.0 * m.n as f64) + (disc.sqrt() - 2.0 * d - 1.0) / (2.0 * d * (d + 1.0));
    if !(a * (d + 1.0) + 1.0 > 0.0) {
        return Err(Error::Numerical(format!(
            "root {a} is not above -1/(D+1) for {m:?}"
        )));
    }
    Ok(a)
}

/// `b_1..b_count`: `b_1 = ... = b_D = a`, then
/// `b_i = a/(aD+1) * (b_{i-1} + ... + b_{i-D})`; all zero when `D = 0`.
pub fn weights_b(delay: usize, a: f64, count: usize) -> Vec<f64> {
    let mut b = vec![0.0; count];
    if delay == 0 {
        return b;
    }
    let factor = a / (a * delay as f64 + 1.0);
    // Running sum of the last `delay` weights.
    let mut window = 0.0;
    for i in 0..count {
        b[i] = if i < delay { a } else { factor * window };
        window += b[i];
        if i >= delay {
            window -= b[i - delay];
        }
    }
    b
}

/// Optimal value `u = -exp(n(a sigma_hat^2 - mu^2)/(2 sigma^2)) * sqrt((1+Da)^(n-D-1) / (1+(D+1)a)^(n-D))`.
pub fn value(m: &DiscreteMarket) -> Result<f64> {
    let a = solve_a(m)?;
    value_with_root(m, a)
}

fn value_with_root(m: &DiscreteMarket, a: f64) -> Result<f64> {
    let n = m.n as f64;
    let log_det = log_det_closed_form(a, m.delay, m.n)?;
    let exponent = n * (a * m.sigma_hat2() - m.mu * m.mu) / (2.0 * m.sigma2()) - 0.5 * log_det;
    Ok(-exponent.exp())
}

/// Full solution for `m`.
pub fn solve(m: &DiscreteMarket) -> Result<HedgeSolution> {
    let a = solve_a(m)?;
    Ok(HedgeSolution {
        a,
        b: weights_b(m.delay, a, m.n - 1),
        static_coeff: a / (2.0 * m.sigma2()),
        merton: m.mu / m.sigma2(),
        value: value_with_root(m, a)?,
    })
}

/// Dynamic position `gamma_i = merton + sum_{j<i} kernel[i-j-1] x_j` and the
/// static payoff `static_coeff * (S_n - S_0)^2`. The linear part of the static
/// payoff is fixed at zero, which picks one representative per equivalence
/// class of strategies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyWeights {
    pub merton: f64,
    /// `w_1..w_{n-1}` with `w_j = (b_j - a) / sigma^2`.
    pub kernel: Vec<f64>,
    pub static_coeff: f64,
}

impl StrategyWeights {
    pub fn from_solution(sol: &HedgeSolution, m: &DiscreteMarket) -> Self {
        let s2 = m.sigma2();
        StrategyWeights {
            merton: sol.merton,
            kernel: sol.b.iter().map(|b| (b - sol.a) / s2).collect(),
            static_coeff: sol.static_coeff,
        }
    }

    /// Holds `merton` shares and nothing else.
    pub fn merton_only(m: &DiscreteMarket) -> Self {
        StrategyWeights {
            merton: m.mu / m.sigma2(),
            kernel: vec![0.0; m.n.saturating_sub(1)],
            static_coeff: 0.0,
        }
    }

    pub fn zero(n: usize) -> Self {
        StrategyWeights {
            merton: 0.0,
            kernel: vec![0.0; n.saturating_sub(1)],
            static_coeff: 0.0,
        }
    }

    pub fn with_kernel_scaled(mut self, k: f64) -> Self {
        self.kernel.iter_mut().for_each(|w| *w *= k);
        self
    }

    pub fn with_static_scaled(mut self, k: f64) -> Self {
        self.static_coeff *= k;
        self
    }

    /// Terminal value as `V(x) = x^T Q x / 2 + linear . x + constant`.
    pub fn quadratic_form(&self, m: &DiscreteMarket) -> QuadraticForm {
        let n = m.n;
        let q = DenseMatrix::from_fn(n, |i, j| {
            let cross = if i == j {
                0.0
            } else {
                self.kernel[i.abs_diff(j) - 1]
            };
            2.0 * self.static_coeff + cross
        });
        QuadraticForm {
            q,
            linear: vec![self.merton; n],
            constant: -self.static_coeff * n as f64 * m.sigma_hat2(),
        }
    }
}

/// `V(x) = x^T q x / 2 + linear . x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub q: DenseMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quad_form(x)
            + self.linear.iter().zip(x).map(|(l, v)| l * v).sum::<f64>()
            + self.constant
    }
}

/// The optimal strategy.
pub fn strategy(m: &DiscreteMarket) -> Result<StrategyWeights> {
    let sol = solve(m)?;
    Ok(StrategyWeights::from_solution(&sol, m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEvaluation {
    pub gammas: Vec<f64>,
    pub terminal_value: f64,
}

/// Positions and terminal value `f(S_n) + sum gamma_i x_i - int f d(nu_hat)`
/// along one path of increments, where `int f* d(nu_hat) = static_coeff * n * sigma_hat^2`.
pub fn evaluate_on_path(
    w: &StrategyWeights,
    m: &DiscreteMarket,
    x: &[f64],
) -> Result<PathEvaluation> {
    if x.len() != m.n {
        return Err(Error::LengthMismatch {
            expected: m.n,
            got: x.len(),
        });
    }
    if w.kernel.len() + 1 < m.n {
        return Err(Error::LengthMismatch {
            expected: m.n - 1,
            got: w.kernel.len(),
        });
    }
    let gammas: Vec<f64> = (0..m.n)
        .map(|i| w.merton + (0..i).map(|j| w.kernel[i - j - 1] * x[j]).sum::<f64>())
        .collect();
    let gains: f64 = gammas.iter().zip(x).map(|(g, v)| g * v).sum();
    let sn: f64 = x.iter().sum();
    let terminal_value =
        w.static_coeff * sn * sn + gains - w.static_coeff * m.n as f64 * m.sigma_hat2();
    Ok(PathEvaluation {
        gammas,
        terminal_value,
    })
}
