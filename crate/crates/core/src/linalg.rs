//! Tridiagonal solves.

/// Thomas algorithm for `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]`.
///
/// `a[0]` and `c[n-1]` are ignored. The solution overwrites `d`. Returns
/// `false` if a pivot vanishes.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut Vec<f64>) -> bool {
    let n = d.len();
    debug_assert!(a.len() == n && b.len() == n && c.len() == n);
    if n == 0 {
        return true;
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut piv = b[0];
    if piv == 0.0 || !piv.is_finite() {
        return false;
    }
    scratch[0] = c[0] / piv;
    d[0] /= piv;
    for i in 1..n {
        piv = b[i] - a[i] * scratch[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return false;
        }
        scratch[i] = c[i] / piv;
        d[i] = (d[i] - a[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
    true
}
