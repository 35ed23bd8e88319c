//! Dense row-major matrices and the symmetric eigen routines the Fréchet
//! distance needs.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Absolute asymmetry tolerated by [`sqrtm_psd`], scaled by the largest
/// entry magnitude (or 1, whichever is larger).
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Row-major dense `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix made of the given rows, in order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|m[i][j] - m[j][i]|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(M + Mᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix: `m = V diag(values) Vᵀ`.
///
/// Column `k` of `vectors` is the eigenvector of `values[k]`.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Symmetric eigen-decomposition (Householder tridiagonalisation + implicit
/// QR, via `nalgebra`). The input is symmetrized before factoring.
pub fn sym_eigen(m: &Matrix) -> Result<SymEigen> {
    check_symmetric(m)?;
    let mut s = m.clone();
    s.symmetrize();
    let eig = SymmetricEigen::new(s.to_nalgebra());
    Ok(SymEigen {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors: Matrix::from_nalgebra(&eig.eigenvectors),
    })
}

/// Eigenvalues only of a symmetric matrix.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let mut s = m.clone();
    s.symmetrize();
    Ok(s.to_nalgebra().symmetric_eigenvalues().iter().copied().collect())
}

/// `V diag(f(λ)) Vᵀ` for a symmetric matrix.
fn spectral_map(eig: &SymEigen, f: impl Fn(f64) -> f64) -> Matrix {
    let n = eig.values.len();
    let mapped: Vec<f64> = eig.values.iter().map(|&l| f(l)).collect();
    let v = &eig.vectors;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (k, &w) in mapped.iter().enumerate() {
                acc += v[(i, k)] * w * v[(j, k)];
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc;
        }
    }
    out
}

/// Principal square root of a symmetric PSD matrix.
///
/// Negative eigenvalues from round-off are clamped to zero, so the result is
/// symmetric PSD and `sqrtm_psd(m)² ≈ m`.
pub fn sqrtm_psd(m: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(m)?;
    Ok(spectral_map(&eig, |l| libm::sqrt(l.max(0.0))))
}

/// A factor `F` with `F Fᵀ = m` for symmetric PSD `m` (`F = V diag(√λ)`).
///
/// Fails with [`Error::NotPsd`] when an eigenvalue is below
/// `-1e-10 · max(1, max|λ|)`.
pub fn psd_factor(m: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(m)?;
    let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * scale {
        return Err(Error::NotPsd(min));
    }
    let n = eig.values.len();
    let mut f = Matrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            f[(i, k)] = eig.vectors[(i, k)] * libm::sqrt(eig.values[k].max(0.0));
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn sqrtm_diagonal() {
        let m = Matrix::from_diagonal(&[4.0, 9.0]);
        let r = sqrtm_psd(&m).unwrap();
        assert!(approx(&r, &Matrix::from_diagonal(&[2.0, 3.0]), 1e-12));
    }

    #[test]
    fn sqrtm_identity() {
        let r = sqrtm_psd(&Matrix::identity(5)).unwrap();
        assert!(approx(&r, &Matrix::identity(5), 1e-12));
    }

    #[test]
    fn sqrtm_rejects_asymmetric() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(sqrtm_psd(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn sqrtm_clamps_tiny_negative_eigenvalues() {
        // rank-one, with round-off pushing one eigenvalue slightly negative
        let m = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0 - 1e-17]]).unwrap();
        let r = sqrtm_psd(&m).unwrap();
        assert!(r.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn factor_rejects_indefinite() {
        let m = Matrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(psd_factor(&m), Err(Error::NotPsd(_))));
    }

    #[test]
    fn factor_reproduces_matrix() {
        let m = Matrix::from_rows(&[[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]]).unwrap();
        let f = psd_factor(&m).unwrap();
        let back = f.matmul(&f.transpose()).unwrap();
        assert!(approx(&back, &m, 1e-12));
    }

    #[test]
    fn matmul_shape_check() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
    }
}
