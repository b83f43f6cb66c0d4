//! Symmetric tridiagonal kernels used by the 1D solvers.

/// Number of eigenvalues of the symmetric tridiagonal matrix `(diag, off)` that
/// are strictly smaller than `x` (Sturm sequence count).
pub(crate) fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1.0) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue by bisection on the Sturm count.
pub(crate) fn lowest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    // Gershgorin bracket
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..diag.len() {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + if i < off.len() { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift) x = rhs` for symmetric tridiagonal `T` with a plain
/// LDL^T sweep. Returns `None` on a zero pivot.
pub(crate) fn solve_shifted(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0] - shift;
    for i in 1..n {
        if d[i - 1] == 0.0 {
            return None;
        }
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - shift - l[i - 1] * off[i - 1];
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut y = rhs.to_vec();
    for i in 1..n {
        y[i] -= l[i - 1] * y[i - 1];
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        y[i] -= l[i] * y[i + 1];
    }
    Some(y)
}

/// Cholesky-based solve for a symmetric positive definite tridiagonal system.
/// Returns `None` when a pivot is not positive.
pub(crate) fn solve_spd(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0];
    if d[0] <= 0.0 {
        return None;
    }
    for i in 1..n {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i - 1] * off[i - 1];
        if d[i] <= 0.0 {
            return None;
        }
    }
    let mut y = rhs.to_vec();
    for i in 1..n {
        y[i] -= l[i - 1] * y[i - 1];
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        y[i] -= l[i] * y[i + 1];
    }
    Some(y)
}

/// Eigenvector for a known eigenvalue by inverse iteration.
pub(crate) fn eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let scale = diag.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let shift = lambda - 1e-10 * scale;
    let mut v = vec![1.0; n];
    for _ in 0..4 {
        let mut w = match solve_shifted(diag, off, shift, &v) {
            Some(w) => w,
            None => solve_shifted(diag, off, shift - 1e-9 * scale, &v).expect("shifted solve"),
        };
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        v = w;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_eigenvalue_of_discrete_laplacian() {
        // tridiag(-1, 2, -1) of size n has eigenvalues 2 - 2 cos(k pi / (n + 1))
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((lowest_eigenvalue(&diag, &off) - exact).abs() < 1e-13);
        assert_eq!(sturm_count(&diag, &off, 4.0), n);
    }

    #[test]
    fn spd_solve_matches_product() {
        let diag = vec![4.0, 5.0, 6.0, 7.0];
        let off = vec![1.0, -2.0, 0.5];
        let x = [1.0, -1.0, 2.0, 0.25];
        let mut b = vec![0.0; 4];
        for i in 0..4 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += off[i - 1] * x[i - 1];
            }
            if i < 3 {
                b[i] += off[i] * x[i + 1];
            }
        }
        let y = solve_spd(&diag, &off, &b).unwrap();
        for i in 0..4 {
            assert!((y[i] - x[i]).abs() < 1e-14);
        }
        assert!(solve_spd(&[-1.0, 2.0], &[0.0], &[1.0, 1.0]).is_none());
    }
}
