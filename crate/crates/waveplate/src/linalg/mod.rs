//! Sparse matrices, direct factorization and iterative spectral routines.
//!
//! Everything is desk-scale: compressed sparse row storage, a left-looking
//! sparse LU with partial pivoting behind a reverse Cuthill-McKee ordering,
//! and subspace iterations for the generalized eigenproblems. Dense
//! fallbacks live in [`dense`] and are used as independent oracles in tests,
//! never in the main pipeline.

pub mod dense;
mod eig;
mod gram;
mod lu;
mod rcm;

pub use eig::{sym_eig_smallest, EigenOptions, GeneralizedEigen};
pub use gram::{
    gram_smallest_singular, smallest_singular_in_norm, smallest_singular_in_norm_deflated,
    GramIterOptions, GramOps, GramSeminorm, SingularEstimate,
};
pub use lu::LuFactor;
pub use rcm::reverse_cuthill_mckee;

use crate::error::{Error, Result};
use num_complex::Complex64;
use num_traits::{One, Zero};
use std::fmt::Debug;
use std::ops::{Neg, SubAssign};

/// Scalar kinds the sparse kernels are generic over: `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + Zero
    + One
    + PartialEq
    + Neg<Output = Self>
    + SubAssign
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::AddAssign
    + std::ops::MulAssign
    + 'static
{
    fn conj_s(self) -> Self;
    fn abs_s(self) -> f64;
    fn from_f64_s(x: f64) -> Self;
}

impl Scalar for f64 {
    fn conj_s(self) -> Self {
        self
    }
    fn abs_s(self) -> f64 {
        self.abs()
    }
    fn from_f64_s(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn conj_s(self) -> Self {
        self.conj()
    }
    fn abs_s(self) -> f64 {
        self.norm()
    }
    fn from_f64_s(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Compressed sparse row matrix. Column indices are strictly increasing in
/// each row and explicit zeros are dropped at finalize.
#[derive(Debug, Clone)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, T)],
    ) -> Result<Self> {
        for &(r, c, _) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::invalid_argument(format!(
                    "triplet index ({r}, {c}) out of range for {nrows}x{ncols} matrix"
                )));
            }
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in entries {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![T::zero(); entries.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in entries {
            let k = cursor[r];
            cols[k] = c;
            vals[k] = v;
            cursor[r] += 1;
        }
        // Sort each row by column and compress duplicates/zeros.
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut row_buf: Vec<(usize, T)> = Vec::new();
        for r in 0..nrows {
            row_buf.clear();
            for k in counts[r]..counts[r + 1] {
                row_buf.push((cols[k], vals[k]));
            }
            row_buf.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row_buf.len() {
                let c = row_buf[i].0;
                let mut v = row_buf[i].1;
                let mut j = i + 1;
                while j < row_buf.len() && row_buf[j].0 == c {
                    v += row_buf[j].1;
                    j += 1;
                }
                if v != T::zero() {
                    indices.push(c);
                    values.push(v);
                }
                i = j;
            }
            indptr[r + 1] = indices.len();
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for r in 0..self.nrows {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A^T x (no conjugation).
    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == T::zero() {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut indptr = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            indptr[c + 1] += 1;
        }
        for i in 0..self.ncols {
            indptr[i + 1] += indptr[i];
        }
        let mut cursor = indptr.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let slot = cursor[c];
                indices[slot] = r;
                values[slot] = self.values[k];
                cursor[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.values.iter().map(|v| v.abs_s()).fold(0.0, f64::max)
    }

    /// max |A - A^T| over all entries (0 for an exactly symmetric matrix).
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let mut row_a: std::collections::HashMap<usize, T> = self.row(r).collect();
            for (c, v) in t.row(r) {
                let a = row_a.remove(&c).unwrap_or_else(T::zero);
                worst = worst.max((a - v).abs_s());
            }
            for (_, a) in row_a {
                worst = worst.max(a.abs_s());
            }
        }
        worst
    }

    /// alpha * A + beta * B.
    pub fn add_scaled(a: &Self, alpha: T, b: &Self, beta: T) -> Result<Self> {
        if a.nrows != b.nrows || a.ncols != b.ncols {
            return Err(Error::invalid_argument("dimension mismatch in add_scaled"));
        }
        let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
        for r in 0..a.nrows {
            for (c, v) in a.row(r) {
                triplets.push((r, c, alpha * v));
            }
            for (c, v) in b.row(r) {
                triplets.push((r, c, beta * v));
            }
        }
        Self::from_triplets(a.nrows, a.ncols, &triplets)
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// Sparse-sparse product A * B.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::invalid_argument("dimension mismatch in matmul"));
        }
        let mut trips: Vec<(usize, usize, T)> = Vec::new();
        for r in 0..self.nrows {
            for (k, va) in self.row(r) {
                for (c, vb) in other.row(k) {
                    trips.push((r, c, va * vb));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, &trips)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[r][c] = v;
            }
        }
        out
    }

    pub(crate) fn raw(&self) -> (&[usize], &[usize], &[T]) {
        (&self.indptr, &self.indices, &self.values)
    }
}

impl SparseMatrix<f64> {
    pub fn to_complex(&self) -> SparseMatrix<Complex64> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    /// Applies a real matrix to a complex vector.
    pub fn matvec_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex64::zero(); self.nrows];
        for r in 0..self.nrows {
            let mut acc = Complex64::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += x[self.indices[k]].scale(self.values[k]);
            }
            y[r] = acc;
        }
        y
    }
}

/// Accumulates (row, col, value) contributions during assembly.
#[derive(Debug, Default, Clone)]
pub struct Triplets {
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    pub fn extend(&mut self, other: Triplets) {
        self.entries.extend(other.entries);
    }

    pub fn build(&self, nrows: usize, ncols: usize) -> Result<SparseMatrix<f64>> {
        SparseMatrix::from_triplets(nrows, ncols, &self.entries)
    }
}

/// Convenience solve with one step of iterative refinement.
pub fn lu_solve<T: Scalar>(a: &SparseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let lu = LuFactor::new(a)?;
    let mut x = lu.solve(b)?;
    // One refinement pass keeps the residual contract comfortable.
    let ax = a.matvec(&x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let dx = lu.solve(&r)?;
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += *di;
    }
    Ok(x)
}

pub(crate) fn dot_c(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
pub(crate) fn norm2_c(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) fn norm2_r(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}
