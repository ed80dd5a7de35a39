//! Row-major dense matrices and the handful of products the network needs.

use serde::{Deserialize, Serialize};

use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// # Panics
    /// If `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|x| *x = f(*x));
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Dot product with four independent accumulators, summed in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += x · wᵀ` with `x: n×k`, `w: m×k`, `out: n×m`.
pub fn gemm_nt_acc(exec: Exec, x: &Matrix, w: &Matrix, out: &mut Matrix) {
    assert_eq!(x.cols, w.cols);
    assert_eq!((out.rows, out.cols), (x.rows, w.rows));
    let m = w.rows;
    exec.for_each_row(&mut out.data, m, |i, row| {
        let xi = x.row(i);
        for (c, o) in row.iter_mut().enumerate() {
            *o += dot(w.row(c), xi);
        }
    });
}

/// `out += daᵀ · x` with `da: n×m`, `x: n×k`, `out: m×k`.
pub fn gemm_tn_acc(exec: Exec, da: &Matrix, x: &Matrix, out: &mut Matrix) {
    assert_eq!(da.rows, x.rows);
    assert_eq!((out.rows, out.cols), (da.cols, x.cols));
    let k = x.cols;
    exec.for_each_row(&mut out.data, k, |c, row| {
        for u in 0..da.rows {
            let g = da[(u, c)];
            if g != 0.0 {
                axpy(g, x.row(u), row);
            }
        }
    });
}

/// `out += da · w` with `da: n×m`, `w: m×k`, `out: n×k`.
pub fn gemm_nn_acc(exec: Exec, da: &Matrix, w: &Matrix, out: &mut Matrix) {
    assert_eq!(da.cols, w.rows);
    assert_eq!((out.rows, out.cols), (da.rows, w.cols));
    let k = w.cols;
    exec.for_each_row(&mut out.data, k, |u, row| {
        for (c, &g) in da.row(u).iter().enumerate() {
            if g != 0.0 {
                axpy(g, w.row(c), row);
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    }

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                for k in 0..a.cols() {
                    out[(i, j)] += a[(i, k)] * b[(k, j)];
                }
            }
        }
        out
    }

    fn transpose(a: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(a.cols(), a.rows());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                t[(j, i)] = a[(i, j)];
            }
        }
        t
    }

    fn close(a: &Matrix, b: &Matrix) -> bool {
        a.shape() == b.shape()
            && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn products_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(7, 13, &mut rng);
        let w = random(70, 13, &mut rng);
        let da = random(7, 70, &mut rng);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let mut out = Matrix::zeros(7, 70);
            gemm_nt_acc(exec, &x, &w, &mut out);
            assert!(close(&out, &naive(&x, &transpose(&w))));

            let mut dw = Matrix::zeros(70, 13);
            gemm_tn_acc(exec, &da, &x, &mut dw);
            assert!(close(&dw, &naive(&transpose(&da), &x)));

            let mut dx = Matrix::zeros(7, 13);
            gemm_nn_acc(exec, &da, &w, &mut dx);
            assert!(close(&dx, &naive(&da, &w)));
        }
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), (0..7).map(|i| (i * i) as f64).sum::<f64>());
        assert_eq!(dot(&[], &[]), 0.0);
    }
}
