//! Direct numerical search over all quadratic semistatic strategies for tiny
//! markets, used as an oracle for the closed-form optimum.
//!
//! The candidate family is a static payoff `q (S_n - S_0)^2` plus positions
//! `gamma_i = g_i + sum_{j <= i-1-D} h_ij x_j`. A linear static term is
//! dropped because it duplicates a constant shift of every `g_i`. Expected
//! utility is evaluated exactly and maximized with Nelder-Mead.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiscreteMarket;
use crate::montecarlo::log_exponential_moment;
use crate::solver::QuadraticForm;
use crate::toeplitz::DenseMatrix;

/// Largest market the brute-force search accepts.
pub const MAX_BRUTE_FORCE_N: usize = 3;

const RESTART_STEPS: [f64; 5] = [0.5, 0.2, 0.05, 0.01, 0.002];
const MAX_ITERS: u64 = 20_000;
const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    /// Best expected utility found.
    pub value: f64,
    pub static_coeff: f64,
    /// Constant part `g_i` of each position.
    pub g: Vec<f64>,
    /// `(i, j, h_ij)` with 0-based indices.
    pub cross: Vec<(usize, usize, f64)>,
    pub iterations: u64,
}

/// Adapted cross terms `(i, j)` with `j + D < i` (0-based).
fn cross_terms(m: &DiscreteMarket) -> Vec<(usize, usize)> {
    (0..m.n)
        .flat_map(|i| (0..i.saturating_sub(m.delay)).map(move |j| (i, j)))
        .collect()
}

struct Search {
    market: DiscreteMarket,
    cross: Vec<(usize, usize)>,
}

impl Search {
    fn form(&self, p: &[f64]) -> QuadraticForm {
        let n = self.market.n;
        let q = p[0];
        let mut mat = DenseMatrix::from_fn(n, |_, _| 2.0 * q);
        for (k, &(i, j)) in self.cross.iter().enumerate() {
            let h = p[1 + n + k];
            mat.set(i, j, mat.get(i, j) + h);
            mat.set(j, i, mat.get(j, i) + h);
        }
        QuadraticForm {
            q: mat,
            linear: p[1..1 + n].to_vec(),
            constant: -q * n as f64 * self.market.sigma_hat2(),
        }
    }

    fn dim(&self) -> usize {
        1 + self.market.n + self.cross.len()
    }
}

impl CostFunction for Search {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        match log_exponential_moment(&self.form(p), &self.market) {
            Ok(v) if v.is_finite() => Ok(v),
            // Outside the integrable region; grow with distance so the
            // simplex is pushed back.
            _ => Ok(PENALTY * (1.0 + p.iter().map(|x| x * x).sum::<f64>())),
        }
    }
}

/// Maximizes expected utility over the quadratic family for `n <= 3`.
pub fn brute_force_optimum(m: &DiscreteMarket) -> Result<BruteForceResult> {
    if m.n > MAX_BRUTE_FORCE_N {
        return Err(Error::Size {
            what: "brute-force market",
            size: m.n,
            limit: MAX_BRUTE_FORCE_N,
        });
    }
    let search = Search {
        market: *m,
        cross: cross_terms(m),
    };
    let dim = search.dim();
    let mut best = vec![0.0; dim];
    let mut iterations = 0;
    for step in RESTART_STEPS {
        let mut simplex = vec![best.clone()];
        for k in 0..dim {
            let mut v = best.clone();
            v[k] += step;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-15)
            .map_err(|e| Error::OptimizerFailure(e.to_string()))?;
        let problem = Search {
            market: *m,
            cross: search.cross.clone(),
        };
        let res = Executor::new(problem, solver)
            .configure(|s| s.max_iters(MAX_ITERS))
            .run()
            .map_err(|e| Error::OptimizerFailure(e.to_string()))?;
        iterations += res.state().get_iter();
        best = res
            .state()
            .get_best_param()
            .cloned()
            .ok_or_else(|| Error::OptimizerFailure("no parameter returned".into()))?;
    }
    let log_moment = log_exponential_moment(&search.form(&best), m)?;
    let n = m.n;
    Ok(BruteForceResult {
        value: -log_moment.exp(),
        static_coeff: best[0],
        g: best[1..1 + n].to_vec(),
        cross: search
            .cross
            .iter()
            .zip(&best[1 + n..])
            .map(|(&(i, j), &h)| (i, j, h))
            .collect(),
        iterations,
    })
}
