//! Small dense matrices stored row-major in flat slices.
//!
//! Flow computations touch one `d x d` matrix per grid point for every
//! simulated path, so the hot loops work on `&[f64]` buffers and only the
//! public single-matrix results are converted to `nalgebra` types.

use nalgebra::DMatrix;

/// `out = a * b` for row-major `d x d` matrices.
#[inline]
pub fn matmul(d: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    match d {
        1 => {
            out[0] = a[0] * b[0];
            return;
        }
        2 => {
            let (a, b, out) = (&a[..4], &b[..4], &mut out[..4]);
            out[0] = a[0] * b[0] + a[1] * b[2];
            out[1] = a[0] * b[1] + a[1] * b[3];
            out[2] = a[2] * b[0] + a[3] * b[2];
            out[3] = a[2] * b[1] + a[3] * b[3];
            return;
        }
        _ => {}
    }
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = acc;
        }
    }
}

pub fn set_identity(d: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
}

pub fn frobenius_sq(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite())
}

pub fn to_matrix(d: usize, m: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, m)
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = m[(i, j)];
        }
    }
    out
}

/// Largest eigenvalue of the symmetric part of a row-major `d x d` matrix,
/// i.e. `max_{|l|=1} <M l, l>`.
pub fn sym_part_max_eigenvalue(d: usize, m: &[f64]) -> f64 {
    match d {
        1 => m[0],
        2 => {
            let a = m[0];
            let c = m[3];
            let b = 0.5 * (m[1] + m[2]);
            let mean = 0.5 * (a + c);
            let half = 0.5 * (a - c);
            mean + (half * half + b * b).sqrt()
        }
        _ => {
            let full = to_matrix(d, m);
            let sym = (&full + full.transpose()) * 0.5;
            sym.symmetric_eigenvalues().max()
        }
    }
}

/// A sequence of `d x d` matrices indexed by grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGrid {
    dim: usize,
    data: Vec<f64>,
}

impl MatrixGrid {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * len] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.dim * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, k: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn get_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.dim * self.dim;
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn matrix(&self, k: usize) -> DMatrix<f64> {
        to_matrix(self.dim, self.get(k))
    }

    pub fn entry(&self, k: usize, i: usize, j: usize) -> f64 {
        self.get(k)[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest entrywise absolute difference against another grid of the
    /// same shape, restricted to indices `range`.
    pub fn max_abs_diff(&self, other: &MatrixGrid, range: std::ops::Range<usize>) -> f64 {
        range
            .flat_map(|k| self.get(k).iter().zip(other.get(k)).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}
