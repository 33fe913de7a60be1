//! Composite Simpson quadrature on smooth pieces.

/// Composite Simpson rule on `[lo, hi]` with `panels` subintervals, rounded
/// up to an even count.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let panels = (panels.max(2) + 1) & !1;
    let step = (hi - lo) / panels as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..panels {
        let v = f(lo + i as f64 * step);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    step / 3.0 * (f(lo) + f(hi) + 4.0 * odd + 2.0 * even)
}
