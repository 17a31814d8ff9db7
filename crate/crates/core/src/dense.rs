//! Dense vectors, row-major matrices, and permutations.
//!
//! Reductions (dot products, norms, row sums) always run in ascending index
//! order so results are reproducible bit for bit.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Dense column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(n: usize) -> Self {
        DenseVector(vec![0.0; n])
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        DenseVector(data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Dot product, summed in index order.
    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.0[i] * other.0[i];
        }
        acc
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|v| v * c).collect())
    }

    pub fn divided(&self, d: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|v| v / d).collect())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &DenseVector) {
        debug_assert_eq!(self.len(), other.len());
        for i in 0..self.len() {
            self.0[i] += c * other.0[i];
        }
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.len(), other.len());
        DenseVector((0..self.len()).map(|i| self.0[i] - other.0[i]).collect())
    }

    /// Scatters into a new vector: `out[p(i)] = self[i]`.
    pub fn permuted(&self, p: &Permutation) -> Result<DenseVector> {
        if p.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "vector permutation",
                expected: self.len(),
                found: p.len(),
            });
        }
        let mut out = vec![0.0; self.len()];
        for (i, &v) in self.0.iter().enumerate() {
            out[p.image(i)] = v;
        }
        Ok(DenseVector(out))
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(data: Vec<f64>) -> Self {
        DenseVector(data)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "dense matrix construction",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> DenseVector {
        DenseVector((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self.set(i, j, v[i]);
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * w^T` for `w` of shape `(m, self.cols)`; both operands row-major,
    /// so each output entry is a dot product of two contiguous rows.
    pub fn matmul_nt(&self, w: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.cols, w.cols);
        let mut out = DenseMatrix::zeros(self.rows, w.rows);
        for i in 0..self.rows {
            let xi = self.row(i);
            let oi = i * w.rows;
            for o in 0..w.rows {
                let wo = w.row(o);
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += xi[k] * wo[k];
                }
                out.data[oi + o] = acc;
            }
        }
        out
    }

    /// `self * w` for `w` of shape `(self.cols, m)`.
    pub fn matmul_nn(&self, w: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.cols, w.rows);
        let mut out = DenseMatrix::zeros(self.rows, w.cols);
        for i in 0..self.rows {
            let xi = self.row(i);
            let oi = i * w.cols;
            for (k, &x) in xi.iter().enumerate() {
                let wk = w.row(k);
                for c in 0..w.cols {
                    out.data[oi + c] += x * wk[c];
                }
            }
        }
        out
    }

    /// `self^T * other` for `other` with the same row count.
    pub fn matmul_tn(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let xi = self.row(i);
            let yi = other.row(i);
            for (c, &x) in xi.iter().enumerate() {
                let oc = c * other.cols;
                for d in 0..other.cols {
                    out.data[oc + d] += x * yi[d];
                }
            }
        }
        out
    }

    /// Sums each column into a vector of length `cols`.
    pub fn column_sums(&self) -> DenseVector {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (c, v) in self.row(i).iter().enumerate() {
                out[c] += v;
            }
        }
        DenseVector::from_vec(out)
    }

    pub fn add_in_place(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    /// Adds `bias` to every row.
    pub fn add_row_bias(&mut self, bias: &[f64]) {
        debug_assert_eq!(bias.len(), self.cols);
        for i in 0..self.rows {
            let r = self.row_mut(i);
            for k in 0..bias.len() {
                r[k] += bias[k];
            }
        }
    }

    /// Reorders rows: row `p(i)` of the result is row `i` of the input.
    pub fn rows_permuted(&self, p: &Permutation) -> Result<DenseMatrix> {
        if p.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix row permutation",
                expected: self.rows,
                found: p.len(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            out.row_mut(p.image(i)).copy_from_slice(self.row(i));
        }
        Ok(out)
    }
}

/// Bijection on `0..n`, stored as its image: `i` maps to `image[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (0..n).collect(),
        }
    }

    pub fn from_image(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &t in &image {
            if t >= n {
                return Err(Error::InvalidPermutation(format!(
                    "target {t} out of range for length {n}"
                )));
            }
            if seen[t] {
                return Err(Error::InvalidPermutation(format!("target {t} repeated")));
            }
            seen[t] = true;
        }
        Ok(Permutation { image })
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random(n: usize, rng: &mut impl rand::Rng) -> Self {
        let mut image: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            image.swap(i, j);
        }
        Permutation { image }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.image.len()];
        for (i, &t) in self.image.iter().enumerate() {
            inv[t] = i;
        }
        Permutation { image: inv }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.image
    }
}
