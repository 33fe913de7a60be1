use delayed_hedge::dual::{build_dual, check_delayed_martingale, check_marginal, DualityCheck};
use delayed_hedge::kernel::{limit_value, KernelSpec};
use delayed_hedge::montecarlo::{generate, strategy_utility};
use delayed_hedge::oracle::closed_form_c;
use delayed_hedge::solver::{solve, solve_a, value, StrategyWeights};
use delayed_hedge::toeplitz::{
    build_a, cholesky_log_det, dense_det, dense_inverse, inverse_via_v, log_det_closed_form,
};
use delayed_hedge::{ContinuousMarket, DiscreteMarket};
use proptest::prelude::*;

fn market() -> impl Strategy<Value = DiscreteMarket> {
    (2usize..24)
        .prop_flat_map(|n| (Just(n), 0..n, -0.5..0.5f64, 0.3..3.0f64, 0.3..3.0f64))
        .prop_map(|(n, d, mu, s, sh)| DiscreteMarket::new(n, d, mu, s, sh).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_bound_and_sign(m in market()) {
        let a = solve_a(&m).unwrap();
        prop_assert!(a * (m.delay as f64 + 1.0) + 1.0 > 0.0);
        prop_assert_eq!(a.partial_cmp(&0.0), (m.sigma - m.sigma_hat).partial_cmp(&0.0));
    }

    #[test]
    fn explicit_inverse_and_determinant(m in market()) {
        let sol = solve(&m).unwrap();
        let dense = build_a(&sol, m.n).unwrap().to_dense();
        let fast = inverse_via_v(sol.a, m.delay, m.n).unwrap();
        let slow = dense_inverse(&dense).unwrap();
        prop_assert!(fast.max_abs_diff(&slow) <= 1e-9 * slow.max_abs().max(1.0));
        let ld = log_det_closed_form(sol.a, m.delay, m.n).unwrap();
        prop_assert!((ld - dense_det(&dense).ln()).abs() < 1e-9);
        prop_assert!((ld - cholesky_log_det(&dense).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn dual_is_delayed_martingale_with_right_marginal(m in market()) {
        let dm = build_dual(&m).unwrap();
        prop_assert!(check_delayed_martingale(&dm.law, m.delay, 1e-9));
        prop_assert!(check_marginal(&dm.law, &m, 1e-9));
    }

    #[test]
    fn pathwise_duality(m in market(), seed in any::<u64>()) {
        let chk = DualityCheck::new(&m).unwrap();
        let batch = generate(&m, 5, seed).unwrap();
        for x in batch.paths() {
            let r = chk.residual(x).unwrap();
            prop_assert!(r.abs() < 1e-8, "{}", r);
        }
    }

    #[test]
    fn optimum_beats_simple_strategies(m in market(), k in 0.0..2.0f64) {
        let u = value(&m).unwrap();
        let merton = strategy_utility(&StrategyWeights::merton_only(&m), &m).unwrap();
        prop_assert!(u >= merton - 1e-12 * merton.abs());
        let w = StrategyWeights::from_solution(&solve(&m).unwrap(), &m)
            .with_kernel_scaled(k)
            .with_static_scaled(k);
        if let Ok(v) = strategy_utility(&w, &m) {
            prop_assert!(u >= v - 1e-10 * v.abs());
        }
    }

    #[test]
    fn value_grows_with_mispricing(
        n in 2usize..30, frac in 0.0..1.0f64, s1 in 0.2..5.0f64, s2 in 0.2..5.0f64,
    ) {
        let d = ((n as f64 * frac) as usize).min(n - 1);
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let u = |sh: f64| value(&DiscreteMarket::new(n, d, 0.1, 1.0, sh).unwrap()).unwrap();
        if lo >= 1.0 {
            prop_assert!(u(lo) <= u(hi) + 1e-14);
        }
        if hi <= 1.0 {
            prop_assert!(u(lo) >= u(hi) - 1e-14);
        }
    }

    #[test]
    fn kernel_solves_integral_equation(h in 0.1..1.0f64, lr in -1.0..1.0f64, t in 0.0..1.0f64) {
        let spec = KernelSpec::new(h, 1.0, lr.exp()).unwrap();
        prop_assert!(spec.one_minus_alpha_h > 0.0);
        let t = h + (1.0 - h) * t;
        prop_assert!(spec.integral_residual(t, 256).unwrap() < 1e-8);
    }

    #[test]
    fn coefficients_match_closed_forms(h in 0.1..1.0f64, lr in -1.0..1.0f64) {
        let spec = KernelSpec::new(h, 1.0, lr.exp()).unwrap();
        for (i, c) in spec.c.iter().enumerate().take(10) {
            let want = closed_form_c(i + 1, spec.alpha, h).unwrap();
            prop_assert!((c - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn limit_value_bounds(h in 0.01..1.0f64, lr in -2.0..2.0f64, theta in -1.0..1.0f64) {
        let u = limit_value(&ContinuousMarket::new(h, theta, 1.0, lr.exp()).unwrap()).unwrap();
        prop_assert!(u <= 0.0);
        prop_assert!(u >= -(-theta * theta / 2.0).exp() * (1.0 + 1e-12));
    }
}

#[test]
fn paths_do_not_depend_on_thread_count() {
    let m = DiscreteMarket::new(6, 2, 0.1, 1.0, 1.2).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| generate(&m, 1000, 9).unwrap());
    let b = four.install(|| generate(&m, 1000, 9).unwrap());
    assert_eq!(a, b);
}
