//! Property suites comparing every closed form with its oracle. Each check
//! reports the worst residual it saw against its tolerance.

use std::str::FromStr;

use serde::Serialize;

use crate::convergence::{
    build_bn, default_h_grid, default_logratio_grid, figure1_data, figure2_data,
    l2_distance_to_kappa, scaled_root, within_factor_of_median,
};
use crate::dual::{
    build_dual, check_delayed_martingale, check_marginal, relative_entropy, DualityCheck,
};
use crate::error::{domain, Error, Result};
use crate::kernel::{limit_certainty_equivalent, limit_value, KernelSpec};
use crate::model::{ContinuousMarket, DiscreteMarket};
use crate::montecarlo::{generate, strategy_utility};
use crate::optimum::brute_force_optimum;
use crate::oracle::{closed_form_c, DelayOdeSolution};
use crate::solver::{solve, QuadraticCoeffs, StrategyWeights};
use crate::toeplitz::{
    build_a, check_banded, check_vanishing_minors, dense_det, dense_inverse, det_closed_form,
    inverse_via_v, VVector, MAX_MINOR_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Matrix,
    Dual,
    Kernel,
    Convergence,
    All,
}

impl Suite {
    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Matrix, Suite::Dual, Suite::Kernel, Suite::Convergence],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Matrix => "matrix",
            Suite::Dual => "dual",
            Suite::Kernel => "kernel",
            Suite::Convergence => "convergence",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(Suite::Matrix),
            "dual" => Ok(Suite::Dual),
            "kernel" => Ok(Suite::Kernel),
            "convergence" => Ok(Suite::Convergence),
            "all" => Ok(Suite::All),
            other => domain(format!("unknown suite {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    /// Largest residual seen; for boolean checks the number of failing cases.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: &'static str,
    pub grid_size: usize,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Largest `n` of the discrete grid (powers of two from 2).
    pub grid_size: usize,
    /// Paths per market for the pathwise duality residual.
    pub paths: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grid_size: 32,
            paths: 100,
            seed: 2024,
        }
    }
}

struct Check {
    suite: &'static str,
    name: &'static str,
    tol: f64,
    worst: f64,
    cases: usize,
    failed: bool,
}

impl Check {
    fn new(suite: &'static str, name: &'static str, tol: f64) -> Self {
        Check {
            suite,
            name,
            tol,
            worst: 0.0,
            cases: 0,
            failed: false,
        }
    }

    fn residual(&mut self, r: f64) {
        self.cases += 1;
        if r.is_nan() || r > self.tol {
            self.failed = true;
        }
        if r.is_nan() || r > self.worst {
            self.worst = r;
        }
    }

    fn holds(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.failed = true;
            self.worst += 1.0;
        }
    }

    fn outcome(&mut self, r: Result<f64>) {
        match r {
            Ok(v) => self.residual(v),
            Err(_) => self.residual(f64::NAN),
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            suite: self.suite,
            name: self.name.to_string(),
            passed: !self.failed,
            worst: self.worst,
            tolerance: self.tol,
            cases: self.cases,
        }
    }
}

/// `n in {2, 4, ..., max_n}`, `D in {0, 1, 2, n/2 - 1}` below `n`,
/// `mu in {0, 0.2}`, `sigma = 1`, `sigma_hat in {0.5, 0.8, 1, 1.3, 2}`.
pub fn standard_grid(max_n: usize) -> Vec<DiscreteMarket> {
    let mut out = Vec::new();
    let mut n = 2;
    while n <= max_n {
        let mut delays = vec![0, 1, 2, (n / 2).saturating_sub(1)];
        delays.retain(|&d| d < n);
        delays.sort_unstable();
        delays.dedup();
        for &d in &delays {
            for mu in [0.0, 0.2] {
                for sh in [0.5, 0.8, 1.0, 1.3, 2.0] {
                    out.push(DiscreteMarket::new(n, d, mu, 1.0, sh).expect("grid market"));
                }
            }
        }
        n *= 2;
    }
    out
}

fn rel(x: f64, want: f64) -> f64 {
    (x - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

fn matrix_suite(grid: &[DiscreteMarket]) -> Vec<CheckResult> {
    const S: &str = "matrix";
    let mut root = Check::new(S, "root_relative_residual", 1e-12);
    let mut bound = Check::new(S, "root_above_lower_bound", 0.0);
    let mut sign = Check::new(S, "root_sign_law", 0.0);
    let mut inv = Check::new(S, "inverse_via_v_vs_dense_inverse", 1e-9);
    let mut det = Check::new(S, "det_closed_form_vs_dense_det", 1e-9);
    let mut sum = Check::new(S, "inverse_entry_sum", 1e-9);
    let mut band = Check::new(S, "inverse_banded", 0.0);
    let mut trace = Check::new(S, "inverse_trace", 1e-9);
    let mut minors = Check::new(S, "vanishing_minors", 0.0);
    let mut vvec = Check::new(S, "v_vector_solves_first_column", 1e-12);

    for m in grid {
        let sol = match solve(m) {
            Ok(s) => s,
            Err(_) => {
                root.residual(f64::NAN);
                continue;
            }
        };
        let (a, d, n) = (sol.a, m.delay, m.n);
        root.residual(QuadraticCoeffs::new(m).relative_residual(a));
        bound.holds(a * (d as f64 + 1.0) + 1.0 > 0.0);
        let want = (m.sigma - m.sigma_hat).partial_cmp(&0.0);
        sign.holds(a.partial_cmp(&0.0) == want);

        let Ok(t) = build_a(&sol, n) else {
            inv.residual(f64::NAN);
            continue;
        };
        let dense = t.to_dense();
        match (inverse_via_v(a, d, n), dense_inverse(&dense)) {
            (Ok(fast), Ok(slow)) => {
                inv.residual(fast.max_abs_diff(&slow) / slow.max_abs().max(1.0));
                let nf = n as f64;
                sum.residual(rel(fast.sum(), nf * m.sigma_hat2() / m.sigma2()));
                band.holds(check_banded(&fast, d, 1e-10));
                trace.residual(rel(
                    fast.trace(),
                    nf * (1.0 - a * m.sigma_hat2() / m.sigma2()),
                ));
            }
            _ => inv.residual(f64::NAN),
        }
        det.outcome(det_closed_form(a, d, n).map(|x| rel(x, dense_det(&dense))));
        if n <= MAX_MINOR_DIM {
            minors.holds(check_vanishing_minors(&t, d, 1e-9).unwrap_or(false));
        }
        vvec.outcome(VVector::new(a, d, n).map(|v| {
            v.apply(&t)
                .iter()
                .enumerate()
                .map(|(i, x)| (x - if i == 0 { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max)
        }));
    }
    [root, bound, sign, inv, det, sum, band, trace, minors, vvec]
        .into_iter()
        .map(Check::finish)
        .collect()
}

fn dual_suite(grid: &[DiscreteMarket], cfg: &VerifyConfig) -> Vec<CheckResult> {
    const S: &str = "dual";
    let mut pathwise = Check::new(S, "verification_residual", 1e-8);
    let mut kl = Check::new(S, "relative_entropy_vs_c_hat", 1e-10);
    let mut cval = Check::new(S, "c_hat_vs_log_value", 1e-10);
    let mut mart = Check::new(S, "delayed_martingale", 0.0);
    let mut marg = Check::new(S, "terminal_marginal", 0.0);
    let mut utility = Check::new(S, "analytic_utility_vs_value", 1e-10);
    let mut brute = Check::new(S, "brute_force_optimum", 1e-6);

    for m in grid {
        match (DualityCheck::new(m), generate(m, cfg.paths, cfg.seed)) {
            (Ok(chk), Ok(batch)) => {
                for x in batch.paths() {
                    pathwise.outcome(chk.residual(x).map(f64::abs));
                }
            }
            _ => pathwise.residual(f64::NAN),
        }
        let (Ok(dm), Ok(sol)) = (build_dual(m), solve(m)) else {
            kl.residual(f64::NAN);
            continue;
        };
        kl.outcome(relative_entropy(&dm.law, m).map(|e| (e - dm.c_hat).abs()));
        cval.residual((dm.c_hat + (-sol.value).ln()).abs());
        mart.holds(check_delayed_martingale(&dm.law, m.delay, 1e-10));
        marg.holds(check_marginal(&dm.law, m, 1e-10));
        let w = StrategyWeights::from_solution(&sol, m);
        utility.outcome(strategy_utility(&w, m).map(|u| rel(u, sol.value)));
    }

    for (n, d) in [(2, 1), (3, 2)] {
        for mu in [0.0, 0.2] {
            for sh in [0.7, 1.5] {
                let m = DiscreteMarket::new(n, d, mu, 1.0, sh).expect("small market");
                let r = brute_force_optimum(&m)
                    .and_then(|b| Ok((b.value - crate::solver::value(&m)?).abs()));
                brute.outcome(r);
            }
        }
    }
    [pathwise, kl, cval, mart, marg, utility, brute]
        .into_iter()
        .map(Check::finish)
        .collect()
}

/// `(h, ratio)` pairs for the kernel suite, `ratio = varsigma_hat^2 / varsigma^2`.
pub const KERNEL_CASES: [(f64, f64); 6] = [
    (0.15, 0.5),
    (0.15, 2.0),
    (0.2, 0.5),
    (0.2, 2.0),
    (0.35, 0.5),
    (0.35, 2.0),
];

fn kernel_suite() -> Vec<CheckResult> {
    const S: &str = "kernel";
    let mut closed = Check::new(S, "c_k_vs_closed_forms", 1e-10);
    let mut flat = Check::new(S, "kappa_before_delay", 0.0);
    let mut jump = Check::new(S, "kappa_at_delay", 1e-12);
    let mut integral = Check::new(S, "integral_equation_residual", 1e-8);
    let mut cont = Check::new(S, "kappa_continuity", 1e-10);
    let mut ode = Check::new(S, "delay_ode_oracle", 1e-7);
    let mut positivity = Check::new(S, "one_minus_alpha_h_positive", 0.0);

    for (h, ratio) in KERNEL_CASES {
        let Ok(spec) = ContinuousMarket::from_ratio(h, 0.0, ratio).and_then(|c| KernelSpec::from_market(&c))
        else {
            closed.residual(f64::NAN);
            continue;
        };
        for k in 1..=spec.intervals().min(10) {
            let want = closed_form_c(k, spec.alpha, h).unwrap_or(f64::NAN);
            closed.residual((spec.c[k - 1] - want).abs() / want.abs().max(1.0));
        }
        for i in 0..50 {
            let t = h * i as f64 / 50.0;
            flat.outcome(spec.kappa(t).map(|k| (k - spec.level).abs()));
        }
        let want = spec.alpha * spec.alpha * h / spec.one_minus_alpha_h;
        jump.outcome(spec.kappa(h).map(|k| (k - want).abs()));
        for i in 0..200 {
            let t = h + (1.0 - h) * i as f64 / 199.0;
            integral.outcome(spec.integral_residual(t.min(1.0), 512));
        }
        for k in 2..spec.intervals() {
            cont.residual((spec.kappa_piece(k - 1, h) - spec.kappa_piece(k, 0.0)).abs());
        }
        let sol = DelayOdeSolution::integrate(spec.alpha, h, 1e-4);
        for i in 0..=400 {
            let t = (h + (1.0 - h) * i as f64 / 400.0).min(1.0);
            ode.outcome(spec.kappa(t).map(|k| (k - sol.value_at(t)).abs()));
        }
    }
    for h in default_h_grid() {
        for lr in default_logratio_grid() {
            let ok = ContinuousMarket::new(h, 0.0, 1.0, lr.exp())
                .and_then(|c| KernelSpec::from_market(&c))
                .map(|s| s.one_minus_alpha_h > 0.0)
                .unwrap_or(false);
            positivity.holds(ok);
        }
    }
    [closed, flat, jump, integral, cont, ode, positivity]
        .into_iter()
        .map(Check::finish)
        .collect()
}

fn convergence_suite() -> Vec<CheckResult> {
    const S: &str = "convergence";
    let mut limit = Check::new(S, "value_to_limit_decreasing", 0.0);
    let mut limit_err = Check::new(S, "value_to_limit_at_1e4", 1e-2);
    let mut root_rate = Check::new(S, "scaled_root_rate_bounded", 0.0);
    let mut l2 = Check::new(S, "l2_rate_within_factor_3", 0.0);
    let mut fig1 = Check::new(S, "figure1_gap_relative", 0.05);
    let mut fig1_sign = Check::new(S, "figure1_sign", 0.0);
    let mut fig2 = Check::new(S, "figure2_properties", 0.0);

    for ratio in [0.5, 2.0] {
        let Ok(c) = ContinuousMarket::from_ratio(0.2, 0.0, ratio) else {
            limit.holds(false);
            continue;
        };
        let errs: Result<Vec<f64>> = [100, 1000, 10_000]
            .iter()
            .map(|&n| Ok((solve(&c.discretize(n)?)?.value - limit_value(&c)?).abs()))
            .collect();
        match errs {
            Ok(e) => {
                limit.holds(e[0] > e[1] && e[1] > e[2]);
                limit_err.residual(e[2]);
            }
            Err(_) => limit.holds(false),
        }

        // n |n a_n - L| must stay bounded; checked with the same factor-of-3
        // slack around the median as the L2 rate.
        let spec = KernelSpec::from_market(&c);
        let scaled: Result<Vec<f64>> = [100, 1000, 10_000]
            .iter()
            .map(|&n| {
                let level = spec.as_ref().map_err(Clone::clone)?.level;
                Ok(n as f64 * (scaled_root(&c, n)? - level).abs())
            })
            .collect();
        root_rate.holds(scaled.map(|s| within_factor_of_median(&s, 3.0)).unwrap_or(false));

        let dists: Result<Vec<f64>> = [100, 200, 400, 800]
            .iter()
            .map(|&n| {
                let spec = spec.as_ref().map_err(Clone::clone)?;
                Ok(n as f64 * l2_distance_to_kappa(&build_bn(&c, n)?, spec, 4))
            })
            .collect();
        l2.holds(dists.map(|d| within_factor_of_median(&d, 3.0)).unwrap_or(false));

        match figure1_data(&c, &[1000], 1000, false) {
            Ok(t) => {
                let k = t.column("kappa_shifted").unwrap_or_default();
                let col = t.column("n1000").unwrap_or_default();
                let sup = k.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                let gap = k
                    .iter()
                    .zip(&col)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                fig1.residual(gap / sup);
                let sign = if ratio < 1.0 { -1.0 } else { 1.0 };
                fig1_sign.holds(
                    t.rows
                        .iter()
                        .filter(|r| r[0] >= 0.2)
                        .all(|r| sign * r[1] >= 0.0 && sign * r[2] >= 0.0),
                );
            }
            Err(_) => fig1.residual(f64::NAN),
        }
    }

    // U = -1 on the diagonal and non-strictly monotone toward 0 on each side;
    // the certainty equivalent -log(-U) is strictly monotone even where U
    // underflows to -0.
    let lrs = default_logratio_grid();
    let zero = lrs.iter().position(|&x| x == 0.0).unwrap_or(0);
    match figure2_data(&default_h_grid(), &lrs) {
        Ok(t) => {
            for chunk in t.rows.chunks(lrs.len()) {
                let u: Vec<f64> = chunk.iter().map(|r| r[2]).collect();
                fig2.holds(u[zero] == -1.0);
                fig2.holds(u[..=zero].windows(2).all(|w| w[0] >= w[1]));
                fig2.holds(u[zero..].windows(2).all(|w| w[0] <= w[1]));
                let ce: Result<Vec<f64>> = chunk
                    .iter()
                    .map(|r| {
                        ContinuousMarket::new(r[0], 0.0, 1.0, r[1].exp())
                            .and_then(|c| limit_certainty_equivalent(&c))
                    })
                    .collect();
                fig2.holds(ce.is_ok_and(|ce| {
                    ce[..=zero].windows(2).all(|w| w[0] > w[1])
                        && ce[zero..].windows(2).all(|w| w[0] < w[1])
                }));
            }
        }
        Err(_) => fig2.holds(false),
    }
    let near_zero = ContinuousMarket::new(0.01, 0.0, 1.0, 1f64.exp())
        .and_then(|c| limit_value(&c))
        .map(|u| u.abs() < 0.05)
        .unwrap_or(false);
    fig2.holds(near_zero);

    [limit, limit_err, root_rate, l2, fig1, fig1_sign, fig2]
        .into_iter()
        .map(Check::finish)
        .collect()
}

/// Runs `suite` and collects every check.
pub fn run(suite: Suite, cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.grid_size < 2 {
        return domain(format!("grid size must be at least 2 (got {})", cfg.grid_size));
    }
    if cfg.paths == 0 {
        return domain("paths must be at least 1");
    }
    let grid = standard_grid(cfg.grid_size);
    let mut checks = Vec::new();
    for s in suite.members() {
        checks.extend(match s {
            Suite::Matrix => matrix_suite(&grid),
            Suite::Dual => dual_suite(&grid, cfg),
            Suite::Kernel => kernel_suite(),
            Suite::Convergence => convergence_suite(),
            Suite::All => unreachable!(),
        });
    }
    Ok(VerifyReport {
        suite: suite.name(),
        grid_size: cfg.grid_size,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
