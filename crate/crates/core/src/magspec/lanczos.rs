//! Shift-invert Lanczos for the smallest eigenvalue of the pencil `(A, M)`.

use super::{MagSpecError, MagneticForm};
use crate::oned::tridiag;
use crate::sparse::{dot, norm, Cholesky, CsrMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub shift: f64,
    /// Relative residual target `|A u - lambda M u| <= tol |M u|`.
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { shift: 0.2, tol: 1e-8, krylov_dim: 60, max_restarts: 12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Mass-normalized nodal values, zero on constrained nodes.
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn lowest_eigenpair(form: &MagneticForm) -> Result<EigenPair, MagSpecError> {
    lowest_eigenpair_with(form, &LanczosOptions::default())
}

pub fn lowest_eigenpair_with(form: &MagneticForm, opts: &LanczosOptions) -> Result<EigenPair, MagSpecError> {
    let (a, m) = form.free_pencil();
    if a.n == 0 {
        return Err(MagSpecError::InvalidParameter("no free degrees of freedom".into()));
    }
    let (lambda, u, residual, iterations) = pencil_lowest(&a, &m, opts)?;
    Ok(EigenPair { lambda, vector: form.extend(&u), residual, iterations })
}

/// Factorizes `A - sigma M`, lowering `sigma` if the shifted matrix turns out
/// indefinite (the shift must stay below the spectrum).
fn factor_shifted(a: &CsrMatrix, m: &CsrMatrix, shift: f64) -> Result<(f64, Cholesky), MagSpecError> {
    let mut sigma = shift;
    let mut last = None;
    for _ in 0..8 {
        match Cholesky::new(&a.add_scaled(-sigma, m)) {
            Ok(c) => return Ok((sigma, c)),
            Err(e) => last = Some(e),
        }
        sigma = if sigma > 0.0 { 0.5 * sigma - 0.05 } else { 2.0 * sigma - 0.1 };
    }
    Err(last.unwrap().into())
}

pub(crate) fn pencil_lowest(a: &CsrMatrix, m: &CsrMatrix, opts: &LanczosOptions) -> Result<(f64, Vec<Complex64>, f64, usize), MagSpecError> {
    let n = a.n;
    let (sigma, chol) = factor_shifted(a, m, opts.shift)?;
    let dim = opts.krylov_dim.min(n).max(1);
    let zero = Complex64::new(0.0, 0.0);
    // deterministic start vector with no special symmetry
    let mut start: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * ((i as f64) * 0.7).sin(), 0.1 * ((i as f64) * 1.3).cos()))
        .collect();
    let mut iterations = 0;
    let mut best = (f64::NAN, start.clone(), f64::INFINITY);
    for _ in 0..=opts.max_restarts {
        let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(dim + 1);
        let s = m.form(&start).sqrt();
        v.push(start.iter().map(|z| z / s).collect());
        let mut alpha = Vec::with_capacity(dim);
        let mut beta = Vec::with_capacity(dim);
        for j in 0..dim {
            iterations += 1;
            let mut w = chol.solve(&m.matvec(&v[j]));
            // two passes of classical Gram-Schmidt in the M inner product
            for pass in 0..2 {
                let mw = m.matvec(&w);
                for i in 0..=j {
                    let h = dot(&v[i], &mw);
                    if pass == 0 && i == j {
                        alpha.push(h.re);
                    }
                    for (wk, vk) in w.iter_mut().zip(&v[i]) {
                        *wk -= h * vk;
                    }
                }
            }
            let b = m.form(&w).max(0.0).sqrt();
            if j + 1 == dim || b <= 1e-14 * alpha[j].abs() {
                break;
            }
            beta.push(b);
            v.push(w.iter().map(|z| z / b).collect());
        }
        // largest Ritz value of T is the smallest of -T
        let k = alpha.len();
        let neg_d: Vec<f64> = alpha.iter().map(|x| -x).collect();
        let neg_o: Vec<f64> = beta[..k - 1].iter().map(|x| -x).collect();
        let theta = -tridiag::lowest_eigenvalue(&neg_d, &neg_o);
        let y = if k == 1 { vec![1.0] } else { tridiag::eigenvector(&neg_d, &neg_o, -theta) };
        let mut u = vec![zero; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (uk, vk) in u.iter_mut().zip(vi) {
                *uk += vk * *yi;
            }
        }
        let mu = m.matvec(&u);
        let s = dot(&u, &mu).re.sqrt();
        u.iter_mut().for_each(|z| *z /= s);
        let mu: Vec<Complex64> = mu.iter().map(|z| z / s).collect();
        let au = a.matvec(&u);
        let lambda = dot(&u, &au).re;
        let r: Vec<Complex64> = au.iter().zip(&mu).map(|(x, y)| x - y * lambda).collect();
        let residual = norm(&r) / norm(&mu);
        debug_assert!((lambda - (sigma + 1.0 / theta)).abs() < 1e-6 * lambda.abs().max(1.0) || residual > 1e-6);
        if residual < best.2 {
            best = (lambda, u.clone(), residual);
        }
        if residual <= opts.tol {
            break;
        }
        start = u;
    }
    let (lambda, u, residual) = best;
    if !(residual <= opts.tol) {
        return Err(MagSpecError::Stagnation { iterations, residual });
    }
    Ok((lambda, u, residual, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let n = 30;
        let diag = |f: &dyn Fn(usize) -> f64| {
            CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, Complex64::new(f(i), 0.0))).collect())
        };
        let a = diag(&|i| 0.5 + i as f64);
        let m = diag(&|i| 1.0 + 0.01 * i as f64);
        let (lambda, u, res, _) = pencil_lowest(&a, &m, &LanczosOptions::default()).unwrap();
        assert!((lambda - 0.5).abs() < 1e-12);
        assert!(res < 1e-8);
        assert!((u[0].norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn shift_is_lowered_below_spectrum() {
        let n = 10;
        let a = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, Complex64::new(0.05 + i as f64, 0.0))).collect());
        let m = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect());
        let (lambda, _, _, _) = pencil_lowest(&a, &m, &LanczosOptions::default()).unwrap();
        assert!((lambda - 0.05).abs() < 1e-12);
    }
}
