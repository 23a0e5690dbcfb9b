use serde::{Deserialize, Serialize};

use super::scalar::{axpy, dot, Scalar};
use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "DenseMatrix::from_vec",
                format!("{rows}x{cols} = {} values", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::dim(format!("DenseMatrix::from_rows row {i}"), cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `out = self · x + bias`, for a single input vector.
    pub fn matvec_bias(&self, x: &[T], bias: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(bias.len(), self.rows);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x) + bias[i];
        }
    }

    /// `out += self · x`
    pub fn matvec_acc(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(i), x);
        }
    }

    /// `out += selfᵀ · y`
    pub fn matvec_transpose_acc(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, yi) in y.iter().enumerate() {
            if *yi != T::zero() {
                axpy(*yi, self.row(i), out);
            }
        }
    }

    /// `self += alpha · y xᵀ`
    pub fn add_outer(&mut self, alpha: T, y: &[T], x: &[T]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (i, yi) in y.iter().enumerate() {
            if *yi != T::zero() {
                let a = alpha * *yi;
                let cols = self.cols;
                axpy(a, x, &mut self.data[i * cols..(i + 1) * cols]);
            }
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Batched affine map. Each row of `a` is one instance; returns a matrix
/// whose row `n` is `W · a_n + b`.
pub fn affine<T: Scalar>(w: &DenseMatrix<T>, a: &DenseMatrix<T>, b: &[T]) -> Result<DenseMatrix<T>> {
    if a.cols() != w.cols() {
        return Err(Error::dim(
            "affine input",
            format!("W {}x{} needs inputs of width {}", w.rows(), w.cols(), w.cols()),
            format!("batch {}x{}", a.rows(), a.cols()),
        ));
    }
    if b.len() != w.rows() {
        return Err(Error::dim(
            "affine bias",
            format!("W {}x{} needs bias of length {}", w.rows(), w.cols(), w.rows()),
            format!("bias of length {}", b.len()),
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows(), w.rows());
    for n in 0..a.rows() {
        w.matvec_bias(a.row(n), b, out.row_mut(n));
    }
    Ok(out)
}
