//! Complex CSR matrices and a sparse Cholesky wrapper.

use crate::par;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix, summing duplicates in input order.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Self {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside a {n} x {n} matrix");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        par::fill(y, |i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            acc
        });
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `Re(x^H A x)`, the value of the Hermitian form.
    pub fn form(&self, x: &[Complex64]) -> f64 {
        par::sum_range(self.n, |i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            (x[i].conj() * acc).re
        })
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Principal submatrix on the kept indices; `index[i]` is the new position.
    pub fn principal(&self, index: &[Option<usize>], m: usize) -> Self {
        let mut entries = Vec::new();
        for i in 0..self.n {
            if let Some(ni) = index[i] {
                for (j, v) in self.row(i) {
                    if let Some(nj) = index[j] {
                        entries.push((ni, nj, v));
                    }
                }
            }
        }
        Self::from_triplets(m, entries)
    }

    /// `self + c * other` on the union pattern.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            entries.extend(self.row(i).map(|(j, v)| (i, j, v)));
            entries.extend(other.row(i).map(|(j, v)| (i, j, v * c)));
        }
        Self::from_triplets(self.n, entries)
    }
}

/// Cholesky factorization `A = L L^H` of a Hermitian positive definite matrix.
pub struct Cholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, Complex64>,
}

impl fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cholesky").field("n", &self.n).finish()
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("sparse Cholesky failed: {0}")]
pub struct FactorError(pub String);

impl Cholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self, FactorError> {
        faer::set_global_parallelism(faer::Par::Seq);
        // lower triangle of A, stored by columns
        let mut triplets = Vec::with_capacity(a.nnz() / 2 + a.n);
        for i in 0..a.n {
            for (j, v) in a.row(i) {
                if j <= i {
                    triplets.push(Triplet::new(i, j, v));
                }
            }
        }
        let mat = SparseColMat::<usize, Complex64>::try_new_from_triplets(a.n, a.n, &triplets)
            .map_err(|e| FactorError(format!("{e:?}")))?;
        let llt = mat.sp_cholesky(Side::Lower).map_err(|e| FactorError(format!("{e:?}")))?;
        Ok(Self { n: a.n, llt })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        use faer::linalg::solvers::SolveCore;
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<Complex64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place_with_conj(faer::Conj::No, rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

/// Real part of the Hermitian inner product, chunked for reproducibility.
pub fn re_dot(x: &[Complex64], y: &[Complex64]) -> f64 {
    par::sum_range(x.len(), |i| x[i].re * y[i].re + x[i].im * y[i].im)
}

pub fn norm(x: &[Complex64]) -> f64 {
    re_dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hermitian_tridiag(n: usize) -> CsrMatrix {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, c(4.0, 0.0)));
            if i + 1 < n {
                e.push((i, i + 1, c(1.0, 0.5)));
                e.push((i + 1, i, c(1.0, -0.5)));
            }
        }
        CsrMatrix::from_triplets(n, e)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(2.0, 0.0)), (0, 1, c(0.5, 1.0))]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), c(1.5, 1.0));
        assert_eq!(a.get(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let a = hermitian_tridiag(50);
        assert_eq!(a.hermitian_defect(), 0.0);
        let x: Vec<_> = (0..50).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let b = a.matvec(&x);
        let y = Cholesky::new(&a).unwrap().solve(&b);
        let err = x.iter().zip(&y).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert!((a.form(&x) - dot(&x, &b).re).abs() < 1e-10);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = hermitian_tridiag(10).add_scaled(-10.0, &CsrMatrix::from_triplets(10, (0..10).map(|i| (i, i, c(1.0, 0.0))).collect()));
        assert!(Cholesky::new(&a).is_err());
    }

    #[test]
    fn principal_submatrix() {
        let a = hermitian_tridiag(4);
        let index = [Some(0), None, Some(1), Some(2)];
        let b = a.principal(&index, 3);
        assert_eq!(b.get(1, 2), a.get(2, 3));
        assert_eq!(b.get(0, 1), c(0.0, 0.0));
    }
}
