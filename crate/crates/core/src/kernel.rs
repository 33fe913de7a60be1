//! Continuous-time limit: the constant `alpha`, the piecewise
//! exponential-polynomial kernel `kappa`, and the limit value.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::{delay_intervals, validate_delay, ContinuousMarket};
use crate::quad::simpson;

/// `alpha` and `1 - alpha h` for `r = varsigma^2 / varsigma_hat^2`.
///
/// With `d = h r + sqrt(h^2 r^2 + 4 (1-h) r)`, `alpha = (1 - 2/d) / h`. The
/// numerator `d - 2` is rewritten without cancellation so `r = 1` gives
/// exactly zero.
fn alpha_parts(h: f64, r: f64) -> (f64, f64) {
    let root = (h * h * r * r + 4.0 * (1.0 - h) * r).sqrt();
    let d = h * r + root;
    let alpha = 4.0 * (r - 1.0) / (h * d * (root + 2.0 - h * r));
    (alpha, 2.0 / d)
}

/// The constant `alpha` of the limiting kernel.
pub fn alpha(h: f64, varsigma: f64, varsigma_hat: f64) -> Result<f64> {
    ContinuousMarket::new(h, 0.0, varsigma, varsigma_hat)?;
    let r = (varsigma * varsigma) / (varsigma_hat * varsigma_hat);
    Ok(alpha_parts(h, r).0)
}

/// `c_1..c_K` with `K = ceil(1/h)`: `c_1 = -alpha` and
/// `c_{k+1} = e^{alpha h} sum_{j=0}^{k-1} c_{k-j} (-alpha h)^j / j!`.
pub fn c_coefficients(alpha: f64, h: f64) -> Vec<f64> {
    let count = delay_intervals(h);
    let mut c = Vec::with_capacity(count);
    c.push(-alpha);
    let x = -alpha * h;
    let growth = (alpha * h).exp();
    for k in 1..count {
        let mut term = 1.0;
        let mut acc = 0.0;
        for j in 0..k {
            acc += c[k - j - 1] * term;
            term *= x / (j + 1) as f64;
        }
        c.push(growth * acc);
    }
    c
}

/// The limiting kernel for one delay `h` and constant `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub h: f64,
    pub alpha: f64,
    /// `1 - alpha h`, always positive.
    pub one_minus_alpha_h: f64,
    /// `alpha / (1 - alpha h)`, the value of the kernel on `[0, h)`.
    pub level: f64,
    /// `c_1..c_K`.
    pub c: Vec<f64>,
}

impl KernelSpec {
    pub fn new(h: f64, varsigma: f64, varsigma_hat: f64) -> Result<Self> {
        ContinuousMarket::new(h, 0.0, varsigma, varsigma_hat)?;
        let r = (varsigma * varsigma) / (varsigma_hat * varsigma_hat);
        let (alpha, omah) = alpha_parts(h, r);
        Ok(Self::assemble(h, alpha, omah))
    }

    pub fn from_market(c: &ContinuousMarket) -> Result<Self> {
        Self::new(c.h, c.varsigma, c.varsigma_hat)
    }

    /// Kernel for an arbitrary `alpha` with `alpha h < 1`.
    pub fn from_alpha(alpha: f64, h: f64) -> Result<Self> {
        validate_delay(h)?;
        let omah = 1.0 - alpha * h;
        if !(omah > 0.0) || !alpha.is_finite() {
            return domain(format!("alpha * h must be < 1 (alpha={alpha}, h={h})"));
        }
        Ok(Self::assemble(h, alpha, omah))
    }

    fn assemble(h: f64, alpha: f64, omah: f64) -> Self {
        KernelSpec {
            h,
            alpha,
            one_minus_alpha_h: omah,
            level: alpha / (1.0 - alpha * h),
            c: c_coefficients(alpha, h),
        }
    }

    pub fn intervals(&self) -> usize {
        self.c.len()
    }

    /// Left end `k h` of interval `k`.
    pub fn interval_start(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Index of the interval `[k h, (k+1) h)` holding `t`; `t = 1` belongs
    /// to the last one.
    pub fn interval_of(&self, t: f64) -> usize {
        let last = self.intervals() - 1;
        let mut k = ((t / self.h).floor().max(0.0) as usize).min(last);
        while k > 0 && t < self.interval_start(k) {
            k -= 1;
        }
        while k < last && self.interval_start(k + 1) <= t {
            k += 1;
        }
        k
    }

    /// Kernel on interval `k` at offset `s = t - k h`:
    /// `level + e^{alpha s} sum_{j=0}^{k-1} c_{k-j} (-alpha s)^j / j!`.
    pub fn kappa_piece(&self, k: usize, s: f64) -> f64 {
        if k == 0 {
            return self.level;
        }
        let x = -self.alpha * s;
        let mut acc = self.c[0];
        for j in (0..k - 1).rev() {
            acc = self.c[k - j - 1] + acc * x / (j + 1) as f64;
        }
        self.level + (self.alpha * s).exp() * acc
    }

    /// `kappa(t)` for `t` in `[0, 1]`.
    pub fn kappa(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return domain(format!("t must lie in [0, 1] (got {t})"));
        }
        let k = self.interval_of(t);
        Ok(self.kappa_piece(k, t - self.interval_start(k)))
    }

    /// `kappa(u) - level`: the weight on an increment observed `u` ago. It
    /// vanishes inside the delay window.
    pub fn gamma_kernel(&self, u: f64) -> Result<f64> {
        Ok(self.kappa(u)? - self.level)
    }

    /// Integral of `kappa` over `[lo, hi]`, split at every multiple of `h`.
    pub fn integral(&self, lo: f64, hi: f64, panels_per_delay: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..self.intervals() {
            let start = self.interval_start(k);
            let end = if k + 1 == self.intervals() {
                f64::INFINITY
            } else {
                self.interval_start(k + 1)
            };
            let (u, v) = (lo.max(start), hi.min(end));
            if v > u {
                let panels = ((panels_per_delay as f64 * (v - u) / self.h).ceil() as usize).max(2);
                total += simpson(|t| self.kappa_piece(k, t - start), u, v, panels);
            }
        }
        total
    }

    /// `|kappa(t) - alpha * int_{t-h}^t kappa|` for `t` in `[h, 1]`.
    pub fn integral_residual(&self, t: f64, panels_per_delay: usize) -> Result<f64> {
        if !(t >= self.h && t <= 1.0) {
            return domain(format!("t must lie in [h, 1] (got {t}, h={})", self.h));
        }
        let k = self.kappa(t)?;
        Ok((k - self.alpha * self.integral(t - self.h, t, panels_per_delay)).abs())
    }
}

/// `kappa(t)` for the kernel `spec`.
pub fn kappa(t: f64, spec: &KernelSpec) -> Result<f64> {
    spec.kappa(t)
}

/// `|kappa(t) - alpha * int_{t-h}^t kappa|`.
pub fn kappa_integral_residual(t: f64, spec: &KernelSpec, panels_per_delay: usize) -> Result<f64> {
    spec.integral_residual(t, panels_per_delay)
}

/// Limit value
/// `-exp((-theta^2/varsigma^2 + alpha (varsigma_hat^2/(varsigma^2 (1 - alpha h)) + h - 1)) / 2) sqrt(1 - alpha h)`.
pub fn limit_value(c: &ContinuousMarket) -> Result<f64> {
    Ok(-(-limit_certainty_equivalent(c)?).exp())
}

/// `-log(-U)` for the limit value `U`. Stays finite where `U` underflows.
pub fn limit_certainty_equivalent(c: &ContinuousMarket) -> Result<f64> {
    c.validate()?;
    let (alpha, omah) = alpha_parts(c.h, c.variance_ratio());
    let s2 = c.varsigma * c.varsigma;
    let inner = alpha * (c.varsigma_hat * c.varsigma_hat / (s2 * omah) + c.h - 1.0);
    Ok(-0.5 * (-c.theta * c.theta / s2 + inner) - 0.5 * omah.ln())
}

/// Coefficient of the limiting static payoff `(P_1 - P_0)^2`.
pub fn limit_static_coeff(c: &ContinuousMarket) -> Result<f64> {
    c.validate()?;
    let (alpha, omah) = alpha_parts(c.h, c.variance_ratio());
    Ok(alpha / (2.0 * c.varsigma * c.varsigma * omah))
}
