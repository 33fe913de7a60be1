//! Independent reference computations used to cross-check the closed forms.
//!
//! Nothing here calls into the solver or kernel code paths it is used to
//! check.

use crate::solver::QuadraticCoeffs;

/// Both real roots `(low, high)` of `qa z^2 + qb z + qc`, computed with the
/// cancellation-free `q = -(qb + sign(qb) sqrt(disc)) / 2` form.
pub fn quadratic_roots(q: &QuadraticCoeffs) -> Option<(f64, f64)> {
    if q.qa == 0.0 {
        if q.qb == 0.0 {
            return None;
        }
        let r = -q.qc / q.qb;
        return Some((r, r));
    }
    let disc = q.discriminant();
    if disc < 0.0 {
        return None;
    }
    let t = -0.5 * (q.qb + q.qb.signum() * disc.sqrt());
    let r1 = t / q.qa;
    let r2 = if t != 0.0 { q.qc / t } else { r1 };
    Some((r1.min(r2), r1.max(r2)))
}

/// Symbolic closed forms of the first ten kernel coefficients `c_k`.
pub fn closed_form_c(k: usize, alpha: f64, h: f64) -> Option<f64> {
    let x = alpha * h;
    let e = x.exp();
    let (e2, e3, e4, e5, e6, e7, e8) = (
        e.powi(2),
        e.powi(3),
        e.powi(4),
        e.powi(5),
        e.powi(6),
        e.powi(7),
        e.powi(8),
    );
    let c = match k {
        1 => -alpha,
        2 => -e * alpha,
        3 => e * alpha * (x - e),
        4 => e * alpha * (-x * x + 4.0 * e * x - 2.0 * e2) / 2.0,
        5 => e * (-6.0 * e3 + (18.0 * e2 + x * (x - 12.0 * e)) * x) * alpha / 6.0,
        6 => {
            -e * alpha
                * (x.powi(4) - 32.0 * e * x.powi(3) + 108.0 * e2 * x * x - 96.0 * x * e3
                    + 24.0 * e4)
                / 24.0
        }
        7 => {
            e * alpha
                * (-120.0 * e5
                    + x * (x.powi(4) - 80.0 * e * x.powi(3) + 540.0 * e2 * x * x
                        - 960.0 * x * e3
                        + 600.0 * e4))
                / 120.0
        }
        8 => {
            -(e * alpha / 720.0)
                * (720.0 * e6
                    + x * (x.powi(5) - 192.0 * e * x.powi(4) + 2430.0 * e2 * x.powi(3)
                        - 7680.0 * x * x * e3
                        + 9000.0 * x * e4
                        - 4320.0 * e5))
        }
        9 => {
            (e * alpha / 5040.0)
                * (-5040.0 * e7
                    + x * (x.powi(6) - 448.0 * e * x.powi(5) + 10206.0 * e2 * x.powi(4)
                        - 53760.0 * x.powi(3) * e3
                        + 105000.0 * x * x * e4
                        - 90720.0 * x * e5
                        + 35280.0 * e6))
        }
        10 => {
            -(e * alpha / 40320.0)
                * (40320.0 * e8
                    + x * (x.powi(7) - 1024.0 * e * x.powi(6) + 40824.0 * e2 * x.powi(5)
                        - 344064.0 * x.powi(4) * e3
                        + 1050000.0 * x.powi(3) * e4
                        - 1451520.0 * x * x * e5
                        + 987840.0 * x * e6
                        - 322560.0 * e7))
        }
        _ => return None,
    };
    Some(c)
}

/// Numerical solution of `k'(t) = alpha k(t) - alpha k(t - h)` on `[h, 1]`
/// with `k = alpha/(1 - alpha h)` on `[0, h)` and `k(h) = alpha^2 h/(1 - alpha h)`.
///
/// Classical RK4 with a step dividing `h`, so every kink of the history
/// falls on a node. Delayed values between nodes come from cubic Hermite
/// interpolation of the stored solution.
#[derive(Debug, Clone)]
pub struct DelayOdeSolution {
    h: f64,
    dt: f64,
    times: Vec<f64>,
    values: Vec<f64>,
    /// Derivative at the left end of each step (right limit).
    d_left: Vec<f64>,
    /// Derivative at the right end of each step (left limit).
    d_right: Vec<f64>,
}

impl DelayOdeSolution {
    pub fn integrate(alpha: f64, h: f64, max_step: f64) -> Self {
        assert!(h > 0.0 && h <= 1.0 && max_step > 0.0);
        let level = alpha / (1.0 - alpha * h);
        let per_delay = (h / max_step).ceil().max(1.0) as usize;
        let dt = h / per_delay as f64;

        let mut sol = DelayOdeSolution {
            h,
            dt,
            times: vec![h],
            values: vec![alpha * alpha * h / (1.0 - alpha * h)],
            d_left: Vec::new(),
            d_right: Vec::new(),
        };

        let mut k = 0;
        while sol.times[k] < 1.0 {
            let t0 = sol.times[k];
            let step = dt.min(1.0 - t0);
            if step <= 1e-15 {
                break;
            }
            // Delayed argument for offset `s` in [0, step] of this step.
            let delayed = |sol: &DelayOdeSolution, s: f64| -> f64 {
                if k < per_delay {
                    level
                } else {
                    sol.hermite(k - per_delay, s / dt)
                }
            };
            let f = |y: f64, lag: f64| alpha * (y - lag);
            let y0 = sol.values[k];
            let lag0 = delayed(&sol, 0.0);
            let lag_mid = delayed(&sol, 0.5 * step);
            let lag1 = delayed(&sol, step);
            let k1 = f(y0, lag0);
            let k2 = f(y0 + 0.5 * step * k1, lag_mid);
            let k3 = f(y0 + 0.5 * step * k2, lag_mid);
            let k4 = f(y0 + step * k3, lag1);
            let y1 = y0 + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            sol.d_left.push(k1);
            sol.d_right.push(f(y1, lag1));
            sol.values.push(y1);
            sol.times.push(if step < dt { 1.0 } else { h + (k + 1) as f64 * dt });
            k += 1;
        }
        sol
    }

    /// Hermite interpolant on step `i` at local position `theta` (in units of
    /// the nominal step).
    fn hermite(&self, i: usize, theta: f64) -> f64 {
        let width = self.times[i + 1] - self.times[i];
        let s = theta * self.dt / width;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.d_left[i] * width, self.d_right[i] * width);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }

    /// Interpolated solution at `t` in `[h, 1]`.
    pub fn value_at(&self, t: f64) -> f64 {
        assert!(t >= self.h && t <= 1.0 + 1e-12, "t = {t} outside [h, 1]");
        let last = self.times.len() - 2;
        let i = (((t - self.h) / self.dt).floor() as usize).min(last);
        let theta = (t - self.times[i]) / self.dt;
        self.hermite(i, theta)
    }
}
