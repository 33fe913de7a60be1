//! The symmetric Toeplitz matrix `A_ij = b_|i-j|` behind the optimal
//! strategy, its explicit inverse and determinant, and dense oracles.
//!
//! `A` is stored by its first row. Dense matrices are only materialized for
//! the explicit inverse, the oracles and small structural checks.

use std::fmt::Write as _;
use std::ops::Index;

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::format::fmt_g;
use crate::model::HedgeSolution;

/// Largest dimension accepted by [`check_vanishing_minors`].
pub const MAX_MINOR_DIM: usize = 12;

/// Condition number above which [`dense_inverse`] refuses to invert.
pub const MAX_CONDITION: f64 = 1e12;

/// Square real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        DenseMatrix(DMatrix::from_fn(n, n, f))
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return domain("matrix rows must form a square");
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.0[(i, j)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, k: f64) -> Self {
        DenseMatrix(&self.0 * k)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// `x^T M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| x[i] * (0..n).map(|j| self.0[(i, j)] * x[j]).sum::<f64>())
            .sum()
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        (&self.0 - &other.0).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// One row per line, entries as `%.17g`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row = (0..self.dim()).map(|j| fmt_g(self.0[(i, j)], 17)).join(",");
            let _ = writeln!(out, "{row}");
        }
        out
    }
}

impl From<DMatrix<f64>> for DenseMatrix {
    fn from(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "DenseMatrix must be square");
        DenseMatrix(m)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Symmetric Toeplitz matrix stored by its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymToeplitz {
    first_row: Vec<f64>,
}

impl SymToeplitz {
    pub fn new(first_row: Vec<f64>) -> Result<Self> {
        if first_row.is_empty() {
            return domain("Toeplitz matrix needs at least one entry");
        }
        if first_row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite Toeplitz entry".into()));
        }
        Ok(SymToeplitz { first_row })
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.first_row[i.abs_diff(j)]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim(), |i, j| self.entry(i, j))
    }

    /// `x^T A x` without materializing `A`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let diag: f64 = x.iter().map(|v| v * v).sum::<f64>() * self.first_row[0];
        let off: f64 = (1..n)
            .map(|d| self.first_row[d] * (0..n - d).map(|i| x[i] * x[i + d]).sum::<f64>())
            .sum();
        diag + 2.0 * off
    }
}

/// `A` for an `n`-step solution: first row `(a + 1, b_1, ..., b_{n-1})`.
pub fn build_a(sol: &HedgeSolution, n: usize) -> Result<SymToeplitz> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if sol.b.len() + 1 < n {
        return domain(format!(
            "solution carries {} weights, {} needed",
            sol.b.len(),
            n - 1
        ));
    }
    let mut row = Vec::with_capacity(n);
    row.push(sol.a + 1.0);
    row.extend_from_slice(&sol.b[..n - 1]);
    SymToeplitz::new(row)
}

fn check_root(a: f64, delay: usize) -> Result<()> {
    if !(a * (delay as f64 + 1.0) + 1.0 > 0.0) {
        return domain(format!(
            "a must exceed -1/(D+1) (a = {a}, D = {delay})"
        ));
    }
    Ok(())
}

/// The vector `v` solving `A v = e_0`: `v_0 = (aD+1)/(a(D+1)+1)`,
/// `v_1..v_D = -a/(a(D+1)+1)`, zero beyond `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct VVector {
    v: Vec<f64>,
}

impl VVector {
    pub fn new(a: f64, delay: usize, n: usize) -> Result<Self> {
        check_root(a, delay)?;
        if delay >= n {
            return domain(format!("delay must be < n (delay={delay}, n={n})"));
        }
        let d = delay as f64;
        let den = a * (d + 1.0) + 1.0;
        let mut v = vec![0.0; n];
        v[0] = (a * d + 1.0) / den;
        for x in v.iter_mut().skip(1).take(delay) {
            *x = -a / den;
        }
        Ok(VVector { v })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    /// `sum_j v_j b_|i-j|` for `i = 0..n-1`; equals `e_0` when `t` is `A`.
    pub fn apply(&self, t: &SymToeplitz) -> Vec<f64> {
        let n = self.v.len().min(t.dim());
        (0..n)
            .map(|i| (0..n).map(|j| self.v[j] * t.entry(i, j)).sum())
            .collect()
    }
}

/// `A^{-1}` from the Gohberg-Semencul type formula
///
/// `[A^{-1}]_ij = (sum_{k=1}^{i^j} v_{i-k} v_{j-k} - sum_{k=1}^{i^j-1} v_{n-i+k} v_{n-j+k}) / v_0`
///
/// (1-based). Both sums telescope along each diagonal, giving O(n^2) work.
pub fn inverse_via_v(a: f64, delay: usize, n: usize) -> Result<DenseMatrix> {
    let vv = VVector::new(a, delay, n)?;
    let v = vv.as_slice();
    let mut m = DenseMatrix::zeros(n);
    for d in 0..n {
        // Entries (i, i + d) for 1-based i = 1..=n-d.
        let mut head = 0.0;
        let mut tail = 0.0;
        for i in 1..=n - d {
            head += v[i - 1] * v[i - 1 + d];
            if i >= 2 {
                let p = n - i + 1;
                tail += v[p] * v[p - d];
            }
            let x = (head - tail) / v[0];
            m.set(i - 1, i - 1 + d, x);
            m.set(i - 1 + d, i - 1, x);
        }
    }
    Ok(m)
}

/// `log |A| = (n-D) log(1+(D+1)a) - (n-D-1) log(1+Da)`.
pub fn log_det_closed_form(a: f64, delay: usize, n: usize) -> Result<f64> {
    check_root(a, delay)?;
    if delay >= n {
        return domain(format!("delay must be < n (delay={delay}, n={n})"));
    }
    let d = delay as f64;
    let k = (n - delay) as f64;
    Ok(k * ((d + 1.0) * a).ln_1p() - (k - 1.0) * (d * a).ln_1p())
}

/// `|A| = (1+(D+1)a)^(n-D) / (1+Da)^(n-D-1)`.
pub fn det_closed_form(a: f64, delay: usize, n: usize) -> Result<f64> {
    log_det_closed_form(a, delay, n).map(f64::exp)
}

/// True iff every entry farther than `delay` from the diagonal is at most
/// `tol` times the largest entry in magnitude.
pub fn check_banded(m: &DenseMatrix, delay: usize, tol: f64) -> bool {
    let bound = tol * m.max_abs();
    let n = m.dim();
    (0..n).all(|i| {
        (0..n)
            .filter(|&j| i.abs_diff(j) > delay)
            .all(|j| m.get(i, j).abs() <= bound)
    })
}

/// Checks that every `(D+1) x (D+1)` minor with row indices
/// `i_1 < ... < i_{D+1}`, column indices `j_1 < ... < j_{D+1}` and
/// `i_1 > j_{D+1} - D` vanishes, relative to `max|A_ij|^(D+1)`.
pub fn check_vanishing_minors(a: &SymToeplitz, delay: usize, tol: f64) -> Result<bool> {
    let n = a.dim();
    if n > MAX_MINOR_DIM {
        return Err(Error::Size {
            what: "minor enumeration",
            size: n,
            limit: MAX_MINOR_DIM,
        });
    }
    let k = delay + 1;
    if k > n {
        return Ok(true);
    }
    let dense = a.to_dense();
    let bound = tol * dense.max_abs().powi(k as i32);
    for cols in (0..n).combinations(k) {
        let first_row = (cols[k - 1] + 1).saturating_sub(delay);
        for rows in (first_row..n).combinations(k) {
            let sub = DMatrix::from_fn(k, k, |r, c| dense.get(rows[r], cols[c]));
            if sub.determinant().abs() > bound {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse by partial-pivot LU; fails when the 1-norm condition number
/// exceeds [`MAX_CONDITION`].
pub fn dense_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    let inv = m
        .0
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let cond = norm_one(&m.0) * norm_one(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SingularMatrix);
    }
    Ok(DenseMatrix(inv))
}

/// Determinant by partial-pivot LU.
pub fn dense_det(m: &DenseMatrix) -> f64 {
    m.0.clone().lu().determinant()
}

/// `log |M|` through a Cholesky factorization; `None` unless `M` is SPD.
pub fn cholesky_log_det(m: &DenseMatrix) -> Option<f64> {
    let chol = m.0.clone().cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiscreteMarket;
    use crate::solver::{solve, solve_a, weights_b};

    fn a_matrix(n: usize, delay: usize, sigma_hat: f64) -> (f64, SymToeplitz) {
        let m = DiscreteMarket::new(n, delay, 0.0, 1.0, sigma_hat).unwrap();
        let sol = solve(&m).unwrap();
        (sol.a, build_a(&sol, n).unwrap())
    }

    #[test]
    fn identity_when_volatilities_agree() {
        let (a, t) = a_matrix(5, 2, 1.0);
        assert_eq!(a, 0.0);
        assert_eq!(t.to_dense(), DenseMatrix::identity(5));
        assert_eq!(inverse_via_v(0.0, 2, 5).unwrap(), DenseMatrix::identity(5));
        assert_eq!(det_closed_form(0.0, 2, 5).unwrap(), 1.0);
    }

    #[test]
    fn scalar_matrix_without_delay() {
        let (a, t) = a_matrix(4, 0, 2.0);
        assert_eq!(a, -0.75);
        assert!(t.to_dense().max_abs_diff(&DenseMatrix::identity(4).scaled(0.25)) < 1e-15);
        for a in [-0.5, 0.3, 2.0] {
            let inv = inverse_via_v(a, 0, 4).unwrap();
            let want = DenseMatrix::identity(4).scaled(1.0 / (1.0 + a));
            assert!(inv.max_abs_diff(&want) < 1e-15);
            let det = det_closed_form(a, 0, 4).unwrap();
            assert!((det - (1.0 + a).powi(4)).abs() < 1e-13 * det);
        }
    }

    #[test]
    fn one_step_delay_has_geometric_tail() {
        let (a, t) = a_matrix(5, 1, 2f64.sqrt());
        let row = t.first_row();
        assert_eq!(row[0], a + 1.0);
        assert_eq!(row[1], a);
        for i in 2..5 {
            assert!((row[i] - row[i - 1] * a / (a + 1.0)).abs() < 1e-16);
        }
    }

    #[test]
    fn v_vector_solves_first_column() {
        for (n, delay, sh) in [(6, 2, 0.8), (9, 3, 1.4), (4, 3, 0.5), (7, 0, 1.3)] {
            let (a, t) = a_matrix(n, delay, sh);
            let e = VVector::new(a, delay, n).unwrap().apply(&t);
            for (i, x) in e.iter().enumerate() {
                let want = if i == 0 { 1.0 } else { 0.0 };
                assert!((x - want).abs() < 1e-14, "i={i} got {x}");
            }
        }
    }

    #[test]
    fn explicit_inverse_matches_lu() {
        let (a, t) = a_matrix(6, 2, 0.8);
        let inv = inverse_via_v(a, 2, 6).unwrap();
        let oracle = dense_inverse(&t.to_dense()).unwrap();
        assert!(inv.max_abs_diff(&oracle) < 1e-13);
        assert!(check_banded(&inv, 2, 1e-10));
    }

    #[test]
    fn explicit_determinant_matches_lu() {
        // a = 0.3 with the weights b from the recursion.
        let b = weights_b(2, 0.3, 5);
        let mut row = vec![1.3];
        row.extend(b);
        let t = SymToeplitz::new(row).unwrap();
        let det = det_closed_form(0.3, 2, 6).unwrap();
        let oracle = dense_det(&t.to_dense());
        assert!((det - oracle).abs() < 1e-12 * oracle.abs());
        let chol = cholesky_log_det(&t.to_dense()).unwrap();
        assert!((chol - log_det_closed_form(0.3, 2, 6).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_roots_below_bound() {
        assert!(inverse_via_v(-0.5, 1, 4).is_err());
        assert!(det_closed_form(-1.0 / 3.0, 2, 5).is_err());
        assert!(det_closed_form(-0.34, 2, 5).is_err());
        assert!(VVector::new(0.1, 4, 4).is_err());
    }

    #[test]
    fn bandedness() {
        assert!(check_banded(&DenseMatrix::identity(4), 0, 0.0));
        let m = DiscreteMarket::new(8, 2, 0.0, 1.0, 1.4).unwrap();
        let sol = solve(&m).unwrap();
        let t = build_a(&sol, 8).unwrap();
        let inv = dense_inverse(&t.to_dense()).unwrap();
        assert!(check_banded(&inv, 2, 1e-9));
        assert!(!check_banded(&t.to_dense(), 2, 1e-9));
    }

    #[test]
    fn minors_vanish_for_recursive_weights() {
        let b = weights_b(1, 0.5, 5);
        let mut row = vec![1.5];
        row.extend(b);
        let t = SymToeplitz::new(row.clone()).unwrap();
        assert!(check_vanishing_minors(&t, 1, 1e-9).unwrap());

        row[3] += 0.01;
        let perturbed = SymToeplitz::new(row).unwrap();
        assert!(!check_vanishing_minors(&perturbed, 1, 1e-9).unwrap());

        let ident = SymToeplitz::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        for d in 0..5 {
            assert!(check_vanishing_minors(&ident, d, 1e-12).unwrap());
        }
    }

    #[test]
    fn minor_enumeration_is_capped() {
        let t = SymToeplitz::new(vec![1.0; 13]).unwrap();
        assert!(matches!(
            check_vanishing_minors(&t, 1, 1e-9),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn dense_oracles_on_small_cases() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(dense_inverse(&i2).unwrap(), i2);
        assert_eq!(dense_det(&i2), 1.0);
        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(dense_inverse(&d).unwrap(), i2.scaled(0.5));
        assert_eq!(dense_det(&d), 4.0);
        let singular = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(dense_inverse(&singular), Err(Error::SingularMatrix));
    }

    #[test]
    fn random_spd_residual() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut u = |_, _| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        let g = DenseMatrix::from_fn(5, &mut u);
        let spd: DenseMatrix =
            (g.as_matrix() * g.as_matrix().transpose() + DMatrix::identity(5, 5)).into();
        let inv = dense_inverse(&spd).unwrap();
        let prod: DenseMatrix = (spd.as_matrix() * inv.as_matrix()).into();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(5)) < 1e-10);
    }

    #[test]
    fn quad_form_agrees_with_dense() {
        let t = SymToeplitz::new(vec![1.3, 0.3, 0.1, -0.05]).unwrap();
        let x = [0.4, -1.2, 2.0, 0.7];
        assert!((t.quad_form(&x) - t.to_dense().quad_form(&x)).abs() < 1e-14);
    }

    #[test]
    fn csv_dump_is_full_precision() {
        let m = DenseMatrix::from_rows(&[vec![0.1, 1.0], vec![-2.5, 1.0 / 3.0]]).unwrap();
        assert_eq!(
            m.to_csv(),
            "0.10000000000000001,1\n-2.5,0.33333333333333331\n"
        );
    }

    #[test]
    fn solve_a_is_used_consistently() {
        let m = DiscreteMarket::new(6, 2, 0.0, 1.0, 0.8).unwrap();
        assert_eq!(solve(&m).unwrap().a, solve_a(&m).unwrap());
    }
}
