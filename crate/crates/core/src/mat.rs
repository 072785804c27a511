//! Minimal row-major dense matrix used by the recurrent cell and the
//! feedforward baseline. Hot paths are plain slice loops so the compiler
//! can vectorize them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Self {
        let data = (0..rows * cols).map(|_| f()).collect();
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// out = self * x (out must have `rows` entries, x must have `cols`).
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    /// self += a ⊗ x (rank-one update: self[r][c] += a[r] * x[c]).
    pub fn add_outer(&mut self, a: &[f64], x: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, &xv) in row.iter_mut().zip(x) {
                *w = xv.mul_add(ar, *w);
            }
        }
    }

    /// out += selfᵀ * a, accumulated row by row so the inner loop stays
    /// contiguous over the stored layout.
    pub fn add_transpose_matvec(&self, a: &[f64], out: &mut [f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            let row = self.row(r);
            for (o, &w) in out.iter_mut().zip(row) {
                *o = w.mul_add(ar, *o);
            }
        }
    }
}

/// Unrolled fused-multiply-add dot product; four accumulators keep the
/// reduction pipelined.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (pa, pb) in (&mut ca).zip(&mut cb) {
        acc[0] = pa[0].mul_add(pb[0], acc[0]);
        acc[1] = pa[1].mul_add(pb[1], acc[1]);
        acc[2] = pa[2].mul_add(pb[2], acc[2]);
        acc[3] = pa[3].mul_add(pb[3], acc[3]);
    }
    let mut tail = 0.0;
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = x.mul_add(y, tail);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
