//! Dense row-major matrices and the handful of vector kernels everything
//! else is built from. No external linear algebra dependency: the matrices
//! here are small or matrix-free workloads dominate.

use crate::math;
use alloc::vec;
use alloc::vec::Vec;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        DenseMatrix { rows, cols, data }
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// `out = s * (A x)`, computed on raw slices. `x` has length `cols`.
    pub fn matvec_into(&self, x: &[f64], s: f64, out: &mut [f64]) {
        matvec(&self.data, self.rows, self.cols, x, s, out);
    }

    /// `out = s * (A^T y)`. `y` has length `rows`.
    pub fn matvec_t_into(&self, y: &[f64], s: f64, out: &mut [f64]) {
        matvec_t(&self.data, self.rows, self.cols, y, s, out);
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

/// `out = s * (A x)` for a row-major `rows x cols` slice.
#[inline]
pub fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], s: f64, out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * cols..(i + 1) * cols];
        *o = s * dot(row, x);
    }
}

/// `out = s * (A^T y)` for a row-major `rows x cols` slice.
#[inline]
pub fn matvec_t(a: &[f64], rows: usize, cols: usize, y: &[f64], s: f64, out: &mut [f64]) {
    debug_assert_eq!(y.len(), rows);
    debug_assert_eq!(out.len(), cols);
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..rows {
        let yi = y[i];
        if yi == 0.0 {
            continue;
        }
        let row = &a[i * cols..(i + 1) * cols];
        for (o, &aij) in out.iter_mut().zip(row) {
            *o += aij * yi;
        }
    }
    if s != 1.0 {
        out.iter_mut().for_each(|o| *o *= s);
    }
}

/// `c += s * a b` where `a` is `m x k`, `b` is `k x n`, `c` is `m x n`,
/// all row-major. ikj loop order keeps the inner loop contiguous.
pub fn matmul_accum(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, s: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            let f = s * aip;
            if f == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += f * bv;
            }
        }
    }
}

/// `c = s * a^T b` where `a` is `k x m`, `b` is `k x n`, `c` is `m x n`.
pub fn matmul_at_b(a: &[f64], k: usize, m: usize, b: &[f64], n: usize, s: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.iter_mut().for_each(|v| *v = 0.0);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &api) in arow.iter().enumerate() {
            let f = s * api;
            if f == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += f * bv;
            }
        }
    }
}

/// `c = s * a b^T` where `a` is `m x k`, `b` is `n x k`, `c` is `m x n`.
pub fn matmul_a_bt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, s: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (j, cv) in crow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            *cv = s * dot(arow, brow);
        }
    }
}

#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators so the loop vectorizes without -ffast-math.
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = c * 4;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut rest = 0.0;
    for i in chunks * 4..a.len() {
        rest += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + rest
}

pub fn norm2(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v))
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(math::abs(*x)))
}

/// `y += s * x`
#[inline]
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += s * xv;
    }
}

pub fn scale(v: &mut [f64], s: f64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

/// Normalize in place; returns the original norm (0.0 if the vector was 0).
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        scale(v, 1.0 / n);
    }
    n
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
