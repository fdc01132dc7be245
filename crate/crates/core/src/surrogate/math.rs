// SPDX-License-Identifier: Apache-2.0
//! Dense f64 matrices and the handful of kernels the surrogate needs.
//!
//! Every kernel is deterministic: parallel splits assign whole output rows to
//! one worker and the reduction order over `k` never changes, so results are
//! bit-identical regardless of thread count.

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

const PAR_ROW_THRESHOLD: usize = 64;

/// C = A * B^T with B row-major [N x K]. Realized by transposing B once and
/// running the axpy kernel, which vectorizes far better than row dots; the
/// transpose is O(N*K) against the O(M*N*K) multiply.
pub fn gemm_nt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols);
    let mut bt = Mat::zeros(b.cols, b.rows);
    for r in 0..b.rows {
        for (c, &v) in b.row(r).iter().enumerate() {
            bt.data[c * b.rows + r] = v;
        }
    }
    gemm_nn(a, &bt)
}

/// C = A * B with B row-major [K x N]; row-of-C accumulation (axpy form).
pub fn gemm_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows);
    let mut c = Mat::zeros(a.rows, b.cols);
    let n = b.cols;
    let run = |(r, c_row): (usize, &mut [f64])| {
        let a_row = a.row(r);
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = b.row(k);
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    };
    if a.rows >= PAR_ROW_THRESHOLD {
        c.data.par_chunks_mut(n).enumerate().for_each(run);
    } else {
        c.data.chunks_mut(n).enumerate().for_each(run);
    }
    c
}

/// C = A^T * B for A [M x K], B [M x N] -> C [K x N]. Used for weight
/// gradients; parallel over C rows, accumulation order over m fixed.
pub fn gemm_tn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = Mat::zeros(k, n);
    let run = |(kk, c_row): (usize, &mut [f64])| {
        for i in 0..m {
            let aik = a.data[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let b_row = b.row(i);
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    };
    if k >= 32 && m >= PAR_ROW_THRESHOLD {
        c.data.par_chunks_mut(n).enumerate().for_each(run);
    } else {
        c.data.chunks_mut(n).enumerate().for_each(run);
    }
    c
}

/// y += x, elementwise.
pub fn add_assign(y: &mut Mat, x: &Mat) {
    debug_assert_eq!(y.data.len(), x.data.len());
    for (a, b) in y.data.iter_mut().zip(&x.data) {
        *a += b;
    }
}

/// Adds the bias vector to every row.
pub fn add_bias(m: &mut Mat, bias: &[f64]) {
    debug_assert_eq!(m.cols, bias.len());
    for r in 0..m.rows {
        for (v, b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Column sums (bias gradient).
pub fn col_sums(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    for r in 0..m.rows {
        for (o, v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

/// In-place ReLU; returns nothing, mask recoverable from the output.
pub fn relu(m: &mut Mat) {
    for v in &mut m.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// dx = dy where the forward output was positive, else 0.
pub fn relu_backward(dy: &Mat, forward_out: &Mat) -> Mat {
    let data = dy
        .data
        .iter()
        .zip(&forward_out.data)
        .map(|(&g, &y)| if y > 0.0 { g } else { 0.0 })
        .collect();
    Mat { rows: dy.rows, cols: dy.cols, data }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Row-wise layer norm with learned gain/bias. Returns (normalized-and-scaled
/// output, per-row (mean, rstd)).
pub fn layer_norm(x: &Mat, gamma: &[f64], beta: &[f64]) -> (Mat, Vec<(f64, f64)>) {
    let mut y = Mat::zeros(x.rows, x.cols);
    let mut stats = Vec::with_capacity(x.rows);
    let n = x.cols as f64;
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let rstd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for (j, out) in y.row_mut(r).iter_mut().enumerate() {
            *out = (row[j] - mean) * rstd * gamma[j] + beta[j];
        }
        stats.push((mean, rstd));
    }
    (y, stats)
}

/// Backward of [`layer_norm`]; returns (dx, dgamma, dbeta).
pub fn layer_norm_backward(
    dy: &Mat,
    x: &Mat,
    gamma: &[f64],
    stats: &[(f64, f64)],
) -> (Mat, Vec<f64>, Vec<f64>) {
    let n = x.cols as f64;
    let mut dx = Mat::zeros(x.rows, x.cols);
    let mut dgamma = vec![0.0; x.cols];
    let mut dbeta = vec![0.0; x.cols];
    for r in 0..x.rows {
        let (mean, rstd) = stats[r];
        let x_row = x.row(r);
        let dy_row = dy.row(r);
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for j in 0..x.cols {
            let xhat = (x_row[j] - mean) * rstd;
            let g = dy_row[j] * gamma[j];
            sum_g += g;
            sum_gx += g * xhat;
            dgamma[j] += dy_row[j] * xhat;
            dbeta[j] += dy_row[j];
        }
        let dx_row = dx.row_mut(r);
        for j in 0..x.cols {
            let xhat = (x_row[j] - mean) * rstd;
            let g = dy_row[j] * gamma[j];
            dx_row[j] = (g - sum_g / n - xhat * sum_gx / n) * rstd;
        }
    }
    (dx, dgamma, dbeta)
}

/// Row-wise softmax in place (max-shifted).
pub fn softmax_rows(m: &mut Mat) {
    for r in 0..m.rows {
        let row = m.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// ds = (dA - rowdot(dA, A)) * A, the softmax Jacobian product.
pub fn softmax_backward(da: &Mat, a: &Mat) -> Mat {
    let mut ds = Mat::zeros(a.rows, a.cols);
    for r in 0..a.rows {
        let a_row = a.row(r);
        let da_row = da.row(r);
        let inner: f64 = a_row.iter().zip(da_row).map(|(&x, &g)| x * g).sum();
        for (j, out) in ds.row_mut(r).iter_mut().enumerate() {
            *out = (da_row[j] - inner) * a_row[j];
        }
    }
    ds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> Mat {
        Mat::from_vec(rows, cols, v.to_vec())
    }

    #[test]
    fn gemm_variants_agree_with_naive() {
        let a = mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = mat(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = gemm_nn(&a, &b);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);

        let bt = mat(2, 3, &[7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        assert_eq!(gemm_nt(&a, &bt).data, c.data);

        let at = mat(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(gemm_tn(&at, &b).data, c.data);
    }

    #[test]
    fn layer_norm_normalizes_rows() {
        let x = mat(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let gamma = vec![1.0; 4];
        let beta = vec![0.0; 4];
        let (y, _) = layer_norm(&x, &gamma, &beta);
        let mean: f64 = y.row(0).iter().sum::<f64>() / 4.0;
        let var: f64 = y.row(0).iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut m = mat(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 1.0]);
        softmax_rows(&mut m);
        for r in 0..2 {
            assert!((m.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(m.row(0)[2] > m.row(0)[1]);
    }
}
