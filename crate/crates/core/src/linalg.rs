//! Dense complex matrices and the pseudoinverse-based solvers used by the
//! estimators.
//!
//! Everything here is dense and row-major. Systems at desk scale stay below
//! ~100 buses, so an `N x N` complex matrix is at most a few hundred KB.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

pub type C64 = Complex64;

/// Relative singular-value cutoff for every pseudoinverse in the crate.
pub const PINV_RCOND: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is degenerate (largest singular value {0:e})")]
    DegenerateMatrix(f64),
    #[error("singular value decomposition failed to converge")]
    SvdFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>, LinalgError> {
        if self.cols != x.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Rows and columns picked by index lists, in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Result<Vec<f64>, LinalgError> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(Vec::new());
        }
        let svd = nalgebra::linalg::SVD::try_new(self.to_nalgebra(), false, false, 1e-15, 10_000)
            .ok_or(LinalgError::SvdFailed)?;
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }

    pub fn spectral_norm(&self) -> Result<f64, LinalgError> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    /// Moore-Penrose pseudoinverse; singular values below
    /// `rcond * sigma_max` are treated as zero.
    pub fn pinv(&self, rcond: f64) -> Result<Self, LinalgError> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(Self::zeros(self.cols, self.rows));
        }
        let svd = nalgebra::linalg::SVD::try_new(self.to_nalgebra(), true, true, 1e-15, 10_000)
            .ok_or(LinalgError::SvdFailed)?;
        let u = svd.u.as_ref().ok_or(LinalgError::SvdFailed)?;
        let v_t = svd.v_t.as_ref().ok_or(LinalgError::SvdFailed)?;
        let s = &svd.singular_values;
        let smax = s.iter().copied().fold(0.0, f64::max);
        let cutoff = rcond * smax;
        let mut out = Self::zeros(self.cols, self.rows);
        for (k, &sk) in s.iter().enumerate() {
            if sk <= cutoff || sk == 0.0 {
                continue;
            }
            let inv = 1.0 / sk;
            // out += v_k * (1/s_k) * u_k^H
            for i in 0..self.cols {
                let vik = v_t[(k, i)].conj() * inv;
                if vik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..self.rows {
                    out.data[i * self.rows + j] += vik * u[(j, k)].conj();
                }
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// `(H^H H + mu1 S)^+ H^H z`, the regularized least-squares estimate.
pub fn regularized_solve(
    h: &ComplexMatrix,
    z: &[C64],
    s: &ComplexMatrix,
    mu1: f64,
) -> Result<Vec<C64>, LinalgError> {
    if z.len() != h.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "measurement vector has length {} but H has {} rows",
            z.len(),
            h.rows()
        )));
    }
    if !s.is_square() || s.rows() != h.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "regularizer is {}x{} but the state has {} entries",
            s.rows(),
            s.cols(),
            h.cols()
        )));
    }
    let op = regularized_operator(h, s, mu1)?;
    op.mul_vec(z)
}

/// The linear map `z -> x_hat` of [`regularized_solve`], for reuse across
/// many measurement vectors on the same system.
pub fn regularized_operator(
    h: &ComplexMatrix,
    s: &ComplexMatrix,
    mu1: f64,
) -> Result<ComplexMatrix, LinalgError> {
    if !s.is_square() || s.rows() != h.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "regularizer is {}x{} but the state has {} entries",
            s.rows(),
            s.cols(),
            h.cols()
        )));
    }
    let hh = h.adjoint();
    let normal = hh.matmul(h)?.add(&s.scale(C64::new(mu1, 0.0)))?;
    normal.pinv(PINV_RCOND)?.matmul(&hh)
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_system_returns_measurements() {
        let h = ComplexMatrix::identity(3);
        let s = ComplexMatrix::identity(3);
        let z = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let x = regularized_solve(&h, &z, &s, 0.0).unwrap();
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn two_measurements_of_one_state_average() {
        let h = ComplexMatrix::from_row_major(2, 1, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let s = ComplexMatrix::zeros(1, 1);
        let x = regularized_solve(&h, &[c(1.0, 0.0), c(3.0, 0.0)], &s, 0.0).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = ComplexMatrix::identity(3);
        let s = ComplexMatrix::identity(3);
        assert!(matches!(
            regularized_solve(&h, &[c(1.0, 0.0)], &s, 0.0),
            Err(LinalgError::DimensionMismatch(_))
        ));
        let s2 = ComplexMatrix::identity(2);
        assert!(matches!(
            regularized_solve(&h, &[c(1.0, 0.0); 3], &s2, 0.0),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pinv_of_rank_one_matrix() {
        // [[1, 1], [1, 1]] has pseudoinverse [[1/4, 1/4], [1/4, 1/4]].
        let m = ComplexMatrix::from_fn(2, 2, |_, _| c(1.0, 0.0));
        let p = m.pinv(PINV_RCOND).unwrap();
        for z in p.as_slice() {
            assert!((z - c(0.25, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_values_of_scaled_identity() {
        let m = ComplexMatrix::identity(3).scale(c(0.0, 2.0));
        let s = m.singular_values().unwrap();
        assert_eq!(s.len(), 3);
        for v in s {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }
}
