//! Dense column-major matrices and the validated observation container.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of `f64`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps a column-major buffer. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "matrix buffer length must equal rows*cols"
        );
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column `j` as a contiguous slice.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for j in 0..self.cols {
            let col = self.col(j);
            let vj = v[j];
            for i in 0..self.rows {
                out[i] += col[i] * vj;
            }
        }
        out
    }

    /// True when `self[(i,j)] == self[(j,i)]` bit-for-bit.
    pub fn is_symmetric_exact(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                if self[(i, j)].to_bits() != self[(j, i)].to_bits() {
                    return false;
                }
            }
        }
        true
    }

    /// Replaces `self` with `(self + selfᵀ)/2`. Exactly symmetric afterwards.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:12.6}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute difference norm when `b` is zero.
pub fn rel_frobenius_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.cols, b.cols);
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in a.data.iter().zip(b.data.iter()) {
        diff += (x - y) * (x - y);
        norm += y * y;
    }
    let diff = diff.sqrt();
    let norm = norm.sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// `‖a − b‖₂ / ‖b‖₂` for vectors, absolute when `b` is zero.
pub fn rel_l2_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Observation set: each column is one m-dimensional observation.
///
/// Values are validated to be finite on construction, so downstream operations
/// never need to re-check.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    mat: Matrix,
}

impl DataMatrix {
    /// Builds from a column-major buffer of `rows * cols` finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: idx });
        }
        Ok(DataMatrix {
            mat: Matrix::from_vec(rows, cols, data),
        })
    }

    /// An observation set with `rows` features and no observations.
    pub fn empty(rows: usize) -> Self {
        DataMatrix {
            mat: Matrix::zeros(rows, 0),
        }
    }

    /// Convenience constructor from observation slices (each of length `rows`).
    pub fn from_observations(rows: usize, observations: &[&[f64]]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * observations.len());
        for obs in observations {
            if obs.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: obs.len(),
                });
            }
            data.extend_from_slice(obs);
        }
        DataMatrix::new(rows, observations.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    pub fn cols(&self) -> usize {
        self.mat.cols()
    }

    pub fn col(&self, j: usize) -> &[f64] {
        self.mat.col(j)
    }

    pub fn data(&self) -> &[f64] {
        self.mat.data()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.mat
    }

    /// Column average; zeros when there are no observations.
    pub fn mean_column(&self) -> Vec<f64> {
        crate::moments::column_mean_kernel(self.data(), self.rows(), self.cols())
    }

    /// New set with the columns of `other` appended.
    pub fn append(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if other.rows() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                got: other.rows(),
            });
        }
        let mut data = Vec::with_capacity(self.data().len() + other.data().len());
        data.extend_from_slice(self.data());
        data.extend_from_slice(other.data());
        DataMatrix::new(self.rows(), self.cols() + other.cols(), data)
    }

    /// Splits into (kept, removed) by column index. Indices must be in range
    /// and distinct.
    pub fn split_remove(&self, indices: &[usize]) -> Result<(DataMatrix, DataMatrix)> {
        let n = self.cols();
        let mut take = vec![false; n];
        for &ix in indices {
            if ix >= n {
                return Err(Error::IndexError { index: ix, len: n });
            }
            if take[ix] {
                return Err(Error::IndexError { index: ix, len: n });
            }
            take[ix] = true;
        }
        let mut kept = Vec::with_capacity(self.rows() * (n - indices.len()));
        let mut removed = Vec::with_capacity(self.rows() * indices.len());
        // removed columns keep the order given by `indices`
        for &ix in indices {
            removed.extend_from_slice(self.col(ix));
        }
        for (j, taken) in take.iter().enumerate() {
            if !taken {
                kept.extend_from_slice(self.col(j));
            }
        }
        Ok((
            DataMatrix::new(self.rows(), n - indices.len(), kept)?,
            DataMatrix::new(self.rows(), indices.len(), removed)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = DataMatrix::new(2, 1, vec![1.0, f64::NAN]).unwrap_err();
        assert_eq!(err.name(), "NonFinite");
        let err = DataMatrix::new(1, 2, vec![f64::INFINITY, 0.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 0 });
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = DataMatrix::new(2, 2, vec![1.0, 2.0, 3.0]).unwrap_err();
        assert_eq!(err.name(), "DimensionMismatch");
    }

    #[test]
    fn split_remove_keeps_order() {
        let d = DataMatrix::new(1, 4, vec![10.0, 11.0, 12.0, 13.0]).unwrap();
        let (kept, removed) = d.split_remove(&[2, 0]).unwrap();
        assert_eq!(removed.data(), &[12.0, 10.0]);
        assert_eq!(kept.data(), &[11.0, 13.0]);
    }

    #[test]
    fn split_remove_rejects_bad_index() {
        let d = DataMatrix::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(
            d.split_remove(&[2]).unwrap_err(),
            Error::IndexError { index: 2, len: 2 }
        );
        assert_eq!(
            d.split_remove(&[1, 1]).unwrap_err().name(),
            "IndexError"
        );
    }

    #[test]
    fn symmetrize_is_exact() {
        let mut m = Matrix::from_vec(2, 2, vec![1.0, 0.3, 0.1, 2.0]);
        m.symmetrize();
        assert!(m.is_symmetric_exact());
        assert_eq!(m[(1, 0)], 0.2);
    }
}
