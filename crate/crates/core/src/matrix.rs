//! Dense row-major f64 matrices.
//!
//! Everything in the model is small enough (a few hundred rows, embedding
//! dimension up to a few hundred) that a plain `Vec<f64>` with hand-written
//! kernels beats pulling in a tensor library, and it keeps summation order
//! fixed, which the determinism contract depends on.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        DenseMatrix { rows, cols, data }
    }

    /// 1 x n row vector.
    pub fn row_vector(data: Vec<f64>) -> Self {
        let cols = data.len();
        DenseMatrix::from_vec(1, cols, data)
    }

    /// n x 1 column vector.
    pub fn col_vector(data: Vec<f64>) -> Self {
        let rows = data.len();
        DenseMatrix::from_vec(rows, 1, data)
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// self += other
    pub fn add_assign(&mut self, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    /// self += factor * other
    pub fn add_scaled_assign(&mut self, other: &DenseMatrix, factor: f64) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += factor * b;
        }
    }

    pub fn fill(&mut self, v: f64) {
        for x in self.data.iter_mut() {
            *x = v;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

/// C = A * B, with the k-loop in the middle so B is walked row-contiguously.
/// Rows of A are processed in pairs so each loaded B row feeds two
/// accumulator rows.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(
        a.cols, b.rows,
        "matmul shape mismatch: {}x{} * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    let w = b.cols;
    let mut i = 0;
    while i + 2 <= a.rows {
        let a0 = a.row(i);
        let a1 = a.row(i + 1);
        let (head, tail) = out.data[i * w..].split_at_mut(w);
        let out0 = head;
        let out1 = &mut tail[..w];
        for k in 0..a.cols {
            let (x0, x1) = (a0[k], a1[k]);
            if x0 == 0.0 && x1 == 0.0 {
                continue;
            }
            let b_row = b.row(k);
            for ((o0, o1), &bkj) in out0.iter_mut().zip(out1.iter_mut()).zip(b_row.iter()) {
                *o0 += x0 * bkj;
                *o1 += x1 * bkj;
            }
        }
        i += 2;
    }
    if i < a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * w..(i + 1) * w];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = b.row(k);
            for (o, &bkj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// C = A * B^T
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(
        a.cols, b.cols,
        "matmul_nt shape mismatch: {}x{} * ({}x{})^T",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = DenseMatrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let a_row = a.row(i);
        for j in 0..b.rows {
            let b_row = b.row(j);
            // eight independent accumulator lanes keep the FMA pipeline
            // busy; a single running sum serializes on its own latency
            let mut lanes = [0.0f64; 8];
            let mut chunks_a = a_row.chunks_exact(8);
            let mut chunks_b = b_row.chunks_exact(8);
            for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
                for t in 0..8 {
                    lanes[t] += ca[t] * cb[t];
                }
            }
            let mut acc: f64 = lanes.iter().sum();
            for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
                acc += x * y;
            }
            out.data[i * b.rows + j] = acc;
        }
    }
    out
}

/// C = A^T * B
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(
        a.rows, b.rows,
        "matmul_tn shape mismatch: ({}x{})^T * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = DenseMatrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let a_row = a.row(k);
        let b_row = b.row(k);
        for (i, &aki) in a_row.iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += aki * bkj;
            }
        }
    }
    out
}
