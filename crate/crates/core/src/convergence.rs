//! Discrete-to-continuous bridge: the step function `b^n`, its L2 distance
//! to `kappa`, and the tables behind the two convergence figures.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::format::Table;
use crate::kernel::{limit_value, KernelSpec};
use crate::model::ContinuousMarket;
use crate::quad::simpson;
use crate::solver::{solve_a, weights_b};

/// `b^n_t = values[k]` on `[k/n, (k+1)/n)`, last interval closed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub n: usize,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        let k = ((t * self.n as f64).floor().max(0.0) as usize).min(self.n - 1);
        self.values[k]
    }
}

/// `values[k] = n b_{k+1}` for the `n`-step discretization of `c`.
pub fn build_bn(c: &ContinuousMarket, n: usize) -> Result<StepFunction> {
    let m = c.discretize(n)?;
    let a = solve_a(&m)?;
    let nf = n as f64;
    Ok(StepFunction {
        n,
        values: weights_b(m.delay, a, n).into_iter().map(|b| nf * b).collect(),
    })
}

/// `n a_n` for the `n`-step discretization of `c`.
pub fn scaled_root(c: &ContinuousMarket, n: usize) -> Result<f64> {
    Ok(n as f64 * solve_a(&c.discretize(n)?)?)
}

/// Squared L2[0,1] distance between `f` and `kappa`, integrating each piece
/// between consecutive multiples of `1/n` and of `h` separately.
pub fn l2_distance_to_kappa(f: &StepFunction, spec: &KernelSpec, quadsteps: usize) -> f64 {
    let mut cuts: Vec<f64> = (0..=f.n).map(|k| k as f64 / f.n as f64).collect();
    cuts.extend((1..spec.intervals()).map(|k| spec.interval_start(k)));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts.windows(2)
        .map(|w| {
            let (u, v) = (w[0], w[1]);
            let mid = 0.5 * (u + v);
            let step = f.eval(mid);
            let k = spec.interval_of(mid);
            let start = spec.interval_start(k);
            simpson(|t| (step - spec.kappa_piece(k, t - start)).powi(2), u, v, quadsteps)
        })
        .sum()
}

/// Median of a non-empty sample.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Every entry lies in `[median / factor, median * factor]`.
pub fn within_factor_of_median(xs: &[f64], factor: f64) -> bool {
    let med = median(xs);
    xs.iter().all(|&x| x <= factor * med && x * factor >= med)
}

/// `fig1` table: `t`, `kappa_shifted = kappa_t - alpha/(1 - alpha h)`, and
/// for each `n` a column `n<n>` holding `n (b_i - a_n)` with `i = floor(t n) + 1`
/// capped at `n`, so column and kernel share the same half-open steps. With
/// `unshifted`, `kappa` and `nb<n> = n b_i` are appended.
pub fn figure1_data(
    c: &ContinuousMarket,
    ns: &[usize],
    grid: usize,
    unshifted: bool,
) -> Result<Table> {
    if grid == 0 {
        return domain("grid must be at least 1");
    }
    if ns.is_empty() {
        return domain("at least one n is required");
    }
    let spec = KernelSpec::from_market(c)?;
    let columns: Vec<(f64, Vec<f64>)> = ns
        .par_iter()
        .map(|&n| {
            let m = c.discretize(n)?;
            let a = solve_a(&m)?;
            Ok((a, weights_b(m.delay, a, n)))
        })
        .collect::<Result<_>>()?;

    let mut header = vec!["t".to_string(), "kappa_shifted".to_string()];
    header.extend(ns.iter().map(|n| format!("n{n}")));
    if unshifted {
        header.push("kappa".into());
        header.extend(ns.iter().map(|n| format!("nb{n}")));
    }
    let ns_list: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
    let mut table = Table {
        metadata: Vec::new(),
        header,
        rows: Vec::with_capacity(grid + 1),
    }
    .with_meta("H", c.h)
    .with_meta("theta", c.theta)
    .with_meta("vsigma", c.varsigma)
    .with_meta("vsigma_hat", c.varsigma_hat)
    .with_meta("ns", ns_list.join(";"))
    .with_meta("grid", grid)
    .with_meta("alpha", spec.alpha);

    for i in 0..=grid {
        let t = i as f64 / grid as f64;
        let kappa = spec.kappa(t)?;
        let mut row = vec![t, kappa - spec.level];
        let idx: Vec<usize> = ns.iter().map(|&n| (i * n / grid + 1).min(n)).collect();
        for ((n, (a, b)), &k) in ns.iter().zip(&columns).zip(&idx) {
            row.push(*n as f64 * (b[k - 1] - a));
        }
        if unshifted {
            row.push(kappa);
            for ((n, (_, b)), &k) in ns.iter().zip(&columns).zip(&idx) {
                row.push(*n as f64 * b[k - 1]);
            }
        }
        table.rows.push(row);
    }
    Ok(table)
}

/// `{0.02, 0.04, ..., 1.0}`.
pub fn default_h_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 50.0).collect()
}

/// `{-2.0, -1.9, ..., 2.0}`.
pub fn default_logratio_grid() -> Vec<f64> {
    (-20..=20).map(|i| i as f64 / 10.0).collect()
}

/// `fig2` table: `U = limit_value` at `theta = 0`, `varsigma = 1`,
/// `varsigma_hat = exp(log_ratio)`, rows sorted by `(H, log_ratio)`.
pub fn figure2_data(h_grid: &[f64], logratio_grid: &[f64]) -> Result<Table> {
    let mut hs = h_grid.to_vec();
    let mut lrs = logratio_grid.to_vec();
    hs.sort_by(f64::total_cmp);
    lrs.sort_by(f64::total_cmp);
    let rows: Vec<Vec<f64>> = hs
        .par_iter()
        .flat_map_iter(|&h| lrs.iter().map(move |&lr| (h, lr)))
        .map(|(h, lr)| {
            let c = ContinuousMarket::new(h, 0.0, 1.0, lr.exp())?;
            Ok(vec![h, lr, limit_value(&c)?])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["H", "log_ratio", "U"])
        .with_meta("theta", 0)
        .with_meta("vsigma", 1)
        .with_meta("h_points", hs.len())
        .with_meta("logratio_points", lrs.len());
    table.rows = rows;
    Ok(table)
}
