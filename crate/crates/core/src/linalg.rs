//! Minimal dense square matrices, enough for BFGS updates and covariance
//! estimation at a few hundred parameters.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from rows; `None` if the rows do not form a square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Matrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Replaces the matrix with `(A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// Leading `k x k` block.
    pub fn leading_block(&self, k: usize) -> Matrix {
        let mut out = Matrix::zeros(k);
        for i in 0..k {
            out.data[i * k..(i + 1) * k].copy_from_slice(&self.row(i)[..k]);
        }
        out
    }

    /// Lower Cholesky factor; `None` unless the matrix is symmetric positive
    /// definite (only the lower triangle is read).
    pub fn cholesky(&self) -> Option<Matrix> {
        let n = self.n;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let ljj = libm::sqrt(d);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn inverse_spd(&self) -> Option<Matrix> {
        let n = self.n;
        let l = self.cholesky()?;
        // Invert L column by column, then form L^-T L^-1.
        let mut linv = Matrix::zeros(n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in col..i {
                    s -= l[(i, k)] * linv[(k, col)];
                }
                linv[(i, col)] = s / l[(i, i)];
            }
        }
        let mut inv = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in i..n {
                    s += linv[(k, i)] * linv[(k, j)];
                }
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        Some(inv)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd_matrix() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ])
        .unwrap();
        let inv = a.inverse_spd().unwrap();
        for i in 0..3 {
            let e: Vec<f64> = (0..3).map(|j| inv[(j, i)]).collect();
            let col = a.mul_vec(&e);
            for (j, v) in col.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(a.cholesky().is_none());
        assert!(Matrix::from_rows(&[vec![1.0, 2.0]]).is_none());
    }

    #[test]
    fn block_and_symmetrize() {
        let mut a = Matrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 5.0]]).unwrap();
        a.symmetrize();
        assert_eq!(a[(0, 1)], 3.0);
        assert_eq!(a[(1, 0)], 3.0);
        assert_eq!(a.leading_block(1).to_rows(), vec![vec![1.0]]);
    }
}
