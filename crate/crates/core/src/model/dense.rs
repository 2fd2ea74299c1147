//! Small row-major real matrices for the output head and the baseline.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · x`.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                axpy(&mut out, xr, self.row(r));
            }
        }
        out
    }

    /// `self += a bᵀ`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!((a.len(), b.len()), (self.rows, self.cols));
        for (r, &ar) in a.iter().enumerate() {
            if ar != 0.0 {
                let cols = self.cols;
                axpy(&mut self.data[r * cols..(r + 1) * cols], ar, b);
            }
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &RMat) -> RMat {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = RMat::zeros(self.rows, other.cols);
        for k in 0..self.cols {
            let brow = other.row(k);
            for r in 0..self.rows {
                let a = self.data[r * self.cols + k];
                if a != 0.0 {
                    axpy(&mut out.data[r * other.cols..(r + 1) * other.cols], a, brow);
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &RMat) -> RMat {
        let mut out = RMat::zeros(self.cols, other.cols);
        out.add_t_matmul(self, other);
        out
    }

    /// `self += aᵀ · b`.
    pub fn add_t_matmul(&mut self, a: &RMat, b: &RMat) {
        debug_assert_eq!((a.rows, a.cols, b.cols), (b.rows, self.rows, self.cols));
        let cols = self.cols;
        for r in 0..a.cols {
            let orow = &mut self.data[r * cols..(r + 1) * cols];
            for k in 0..a.rows {
                let v = a.data[k * a.cols + r];
                if v != 0.0 {
                    axpy(orow, v, b.row(k));
                }
            }
        }
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &RMat) -> RMat {
        debug_assert_eq!(self.cols, other.cols);
        let mut out = RMat::zeros(self.rows, other.rows);
        for c in 0..other.rows {
            let b = other.row(c);
            for r in 0..self.rows {
                out.data[r * other.rows + c] = dot(self.row(r), b);
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &RMat) {
        axpy(&mut self.data, 1.0, &other.data);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree() {
        let a = RMat::from_fn(3, 4, |r, c| (r * 4 + c) as f64 - 5.0);
        let b = RMat::from_fn(4, 2, |r, c| (r + 2 * c) as f64 * 0.5);
        let ab = a.matmul(&b);
        assert_eq!(ab.at(1, 1), (0..4).map(|k| a.at(1, k) * b.at(k, 1)).sum::<f64>());
        let at = RMat::from_fn(4, 3, |r, c| a.at(c, r));
        assert_eq!(at.t_matmul(&b), ab);
        let bt = RMat::from_fn(2, 4, |r, c| b.at(c, r));
        assert_eq!(a.matmul_t(&bt), ab);
        assert_eq!(a.t_matvec(&[1.0, 2.0, 3.0]), at.matvec(&[1.0, 2.0, 3.0]));
    }
}
