//! Market parameter types shared by every other module.
//!
//! Risk aversion is fixed at one throughout. A strategy optimal for risk
//! aversion `r` is the unit-aversion strategy divided by `r`, with value
//! `-exp(-r * V)`, so callers rescale outside the solver.

use serde::Serialize;

use crate::error::{domain, Result};

/// Discrete market with `n` trading steps, information delay `delay` (in
/// steps), i.i.d. `Normal(mu, sigma^2)` increments, and a static pricing
/// measure `Normal(s0, n * sigma_hat^2)` for payoffs written on `S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteMarket {
    pub n: usize,
    pub delay: usize,
    pub mu: f64,
    pub sigma: f64,
    pub sigma_hat: f64,
    /// Only carried for reporting; every formula depends on increments.
    pub s0: f64,
}

impl DiscreteMarket {
    pub fn new(n: usize, delay: usize, mu: f64, sigma: f64, sigma_hat: f64) -> Result<Self> {
        validate_discrete(DiscreteMarket {
            n,
            delay,
            mu,
            sigma,
            sigma_hat,
            s0: 0.0,
        })
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    /// sigma^2 / sigma_hat^2.
    pub fn variance_ratio(&self) -> f64 {
        (self.sigma * self.sigma) / (self.sigma_hat * self.sigma_hat)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn sigma_hat2(&self) -> f64 {
        self.sigma_hat * self.sigma_hat
    }
}

/// Returns `m` unchanged when every invariant holds.
pub fn validate_discrete(m: DiscreteMarket) -> Result<DiscreteMarket> {
    if m.n == 0 {
        return domain("n must be at least 1");
    }
    if m.delay >= m.n {
        return domain(format!("delay must be < n (delay={}, n={})", m.delay, m.n));
    }
    if !(m.sigma > 0.0) || !m.sigma.is_finite() {
        return domain(format!("sigma must be positive (got {})", m.sigma));
    }
    if !(m.sigma_hat > 0.0) || !m.sigma_hat.is_finite() {
        return domain(format!("sigma_hat must be positive (got {})", m.sigma_hat));
    }
    if !m.mu.is_finite() {
        return domain("mu must be finite");
    }
    if !m.s0.is_finite() {
        return domain("s0 must be finite");
    }
    Ok(m)
}

/// Bachelier market `P_t = P_0 + theta t + varsigma W_t` on `[0, 1]`, observed
/// with delay `h`, with static pricing measure `Normal(P_0, varsigma_hat^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousMarket {
    pub h: f64,
    pub theta: f64,
    pub varsigma: f64,
    pub varsigma_hat: f64,
    pub p0: f64,
}

impl ContinuousMarket {
    pub fn new(h: f64, theta: f64, varsigma: f64, varsigma_hat: f64) -> Result<Self> {
        let c = ContinuousMarket {
            h,
            theta,
            varsigma,
            varsigma_hat,
            p0: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    /// Market with `varsigma = 1` and `varsigma_hat^2 / varsigma^2 = ratio`.
    pub fn from_ratio(h: f64, theta: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return domain(format!("variance ratio must be positive (got {ratio})"));
        }
        Self::new(h, theta, 1.0, ratio.sqrt())
    }

    pub fn with_p0(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_delay(self.h)?;
        if !(self.varsigma > 0.0) || !self.varsigma.is_finite() {
            return domain(format!("varsigma must be positive (got {})", self.varsigma));
        }
        if !(self.varsigma_hat > 0.0) || !self.varsigma_hat.is_finite() {
            return domain(format!(
                "varsigma_hat must be positive (got {})",
                self.varsigma_hat
            ));
        }
        if !self.theta.is_finite() || !self.p0.is_finite() {
            return domain("theta and p0 must be finite");
        }
        Ok(())
    }

    /// varsigma^2 / varsigma_hat^2.
    pub fn variance_ratio(&self) -> f64 {
        (self.varsigma * self.varsigma) / (self.varsigma_hat * self.varsigma_hat)
    }

    /// `D_n = ceil(h * n)`, the delay measured in grid steps.
    pub fn delay_steps(&self, n: usize) -> usize {
        ceil_mul(self.h, n)
    }

    /// The `n`-step discrete market sampled from this one.
    pub fn discretize(&self, n: usize) -> Result<DiscreteMarket> {
        discretize(self, n)
    }
}

pub(crate) fn validate_delay(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        return domain(format!("delay H must lie in (0, 1] (got {h})"));
    }
    Ok(())
}

/// Samples `c` on the grid `{0, 1/n, ..., 1}`: `D = ceil(H n)`,
/// `mu = theta / n`, `sigma = varsigma / sqrt(n)`, `sigma_hat = varsigma_hat / sqrt(n)`.
pub fn discretize(c: &ContinuousMarket, n: usize) -> Result<DiscreteMarket> {
    c.validate()?;
    if n < 2 {
        return domain(format!("n must be at least 2 (got {n})"));
    }
    let delay = c.delay_steps(n);
    if delay >= n {
        return domain(format!(
            "delay must be < n: ceil(H n) = {delay} for H = {}, n = {n}",
            c.h
        ));
    }
    let root_n = (n as f64).sqrt();
    validate_discrete(DiscreteMarket {
        n,
        delay,
        mu: c.theta / n as f64,
        sigma: c.varsigma / root_n,
        sigma_hat: c.varsigma_hat / root_n,
        s0: c.p0,
    })
}

/// Exact decimal fraction `num / den` behind the shortest round-trip
/// representation of `x`. `0.2` maps to `2 / 10`, not to the binary value.
fn decimal_fraction(x: f64) -> Option<(u128, u128)> {
    if !(x >= 0.0) || !x.is_finite() {
        return None;
    }
    // Display for f64 never switches to exponent notation.
    let s = format!("{x}");
    let (int, frac) = s.split_once('.').unwrap_or((s.as_str(), ""));
    if frac.len() > 30 || int.len() > 6 {
        return None;
    }
    let den = 10u128.checked_pow(frac.len() as u32)?;
    let num: u128 = format!("{int}{frac}").parse().ok()?;
    Some((num, den))
}

/// `ceil(x * n)` evaluated on the decimal value of `x`.
pub fn ceil_mul(x: f64, n: usize) -> usize {
    match decimal_fraction(x) {
        Some((num, den)) => match num.checked_mul(n as u128) {
            Some(p) => ((p + den - 1) / den) as usize,
            None => (x * n as f64).ceil() as usize,
        },
        None => (x * n as f64).ceil() as usize,
    }
}

/// `ceil(1 / h)`, the number of delay intervals covering `[0, 1]`.
pub fn delay_intervals(h: f64) -> usize {
    match decimal_fraction(h) {
        Some((num, den)) if num > 0 => ((den + num - 1) / num) as usize,
        _ => (1.0 / h).ceil() as usize,
    }
}

/// Output of the discrete solver: the root `a`, weights `b_1..b_{n-1}`, the
/// static coefficient `a / (2 sigma^2)`, the Merton fraction, and the value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeSolution {
    pub a: f64,
    pub b: Vec<f64>,
    pub static_coeff: f64,
    pub merton: f64,
    pub value: f64,
}
