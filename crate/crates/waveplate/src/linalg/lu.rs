//! Sparse LU factorization (left-looking Gilbert-Peierls with partial
//! pivoting) behind a reverse Cuthill-McKee column/row preordering.

use super::{reverse_cuthill_mckee, Scalar, SparseMatrix};
use crate::error::{Error, Result};

/// LU factors of a square sparse matrix, reusable for many solves.
///
/// The matrix is symmetrically permuted by RCM, then factored column by
/// column with row partial pivoting: `P (Q A Qᵀ) = L U` where `Q` is the RCM
/// permutation. Forward and adjoint (conjugate-transpose) solves share the
/// factors, so one factorization serves both `Ax = b` and `Aᴴx = b`.
#[derive(Debug)]
pub struct LuFactor<T> {
    n: usize,
    rcm: Vec<usize>, // new -> old
    // L stored by column (unit diagonal implicit); row indices are in the
    // RCM-permuted row space.
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<T>,
    // U stored by column; "row" indices are pivot steps s <= j, diagonal last.
    u_colptr: Vec<usize>,
    u_steps: Vec<usize>,
    u_vals: Vec<T>,
    pivot_rows: Vec<usize>, // step -> permuted row
    row_to_step: Vec<usize>, // inverse of pivot_rows
    /// Row equilibration factors (original indexing): the factored matrix
    /// is diag(row_scale) * A, which keeps the pivot tolerance meaningful
    /// when entries span many orders of magnitude.
    row_scale: Vec<f64>,
    norm_a: f64,
}

impl<T: Scalar> LuFactor<T> {
    pub fn new(a: &SparseMatrix<T>) -> Result<Self> {
        let rcm = reverse_cuthill_mckee(a);
        Self::with_ordering(a, rcm)
    }

    /// Factors with the natural (identity) ordering; mostly for tests.
    pub fn new_natural(a: &SparseMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        Self::with_ordering(a, (0..n).collect())
    }

    fn with_ordering(a: &SparseMatrix<T>, rcm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::invalid_argument("LU needs a square matrix"));
        }
        let norm_a = a.norm_max();
        // Equilibrate rows to unit max magnitude; the pivot tolerance is
        // then 1e-14 relative to the scaled matrix.
        let mut row_scale = vec![1.0f64; n];
        for r in 0..n {
            let m = a.row(r).map(|(_, v)| v.abs_s()).fold(0.0f64, f64::max);
            if m > 0.0 {
                row_scale[r] = 1.0 / m;
            }
        }
        let pivot_tol = 1e-14;

        // Columns of the permuted matrix A'[i, j] = A[rcm[i], rcm[j]], built
        // as a CSC scan: transpose once, then permute.
        let mut inv = vec![0usize; n];
        for (new, &old) in rcm.iter().enumerate() {
            inv[old] = new;
        }
        let at = a.transpose(); // row r of `at` = column r of `a`
        let (at_ptr, at_idx, at_val) = at.raw();

        let mut l_colptr = vec![0usize];
        let mut l_rows: Vec<usize> = Vec::new();
        let mut l_vals: Vec<T> = Vec::new();
        let mut u_colptr = vec![0usize];
        let mut u_steps: Vec<usize> = Vec::new();
        let mut u_vals: Vec<T> = Vec::new();

        let mut pivot_rows = vec![usize::MAX; n];
        let mut row_to_step = vec![usize::MAX; n];

        // Workspaces.
        let mut x = vec![T::zero(); n];
        let mut visited = vec![u32::MAX; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

        for j in 0..n {
            let stamp = j as u32;
            pattern.clear();

            // Scatter column j of the permuted matrix: entries A[old_i, old_j].
            let old_j = rcm[j];
            for k in at_ptr[old_j]..at_ptr[old_j + 1] {
                let i = inv[at_idx[k]];
                x[i] = at_val[k] * T::from_f64_s(row_scale[at_idx[k]]);
                // Depth-first search through already-factored columns to get
                // the full fill pattern in topological (reverse post-) order.
                if visited[i] != stamp {
                    visited[i] = stamp;
                    dfs_stack.push((i, 0));
                    while let Some(&(node, child_start)) = dfs_stack.last() {
                        let s = row_to_step[node];
                        let mut next_child = child_start;
                        let mut descend_to = None;
                        if s != usize::MAX {
                            let lo = l_colptr[s];
                            let hi = l_colptr[s + 1];
                            while lo + next_child < hi {
                                let r2 = l_rows[lo + next_child];
                                next_child += 1;
                                if visited[r2] != stamp {
                                    descend_to = Some(r2);
                                    break;
                                }
                            }
                        }
                        dfs_stack.last_mut().unwrap().1 = next_child;
                        match descend_to {
                            Some(r2) => {
                                visited[r2] = stamp;
                                dfs_stack.push((r2, 0));
                            }
                            None => {
                                dfs_stack.pop();
                                pattern.push(node);
                            }
                        }
                    }
                }
            }

            // Sparse triangular solve in topological order (reverse of the
            // postorder accumulated above).
            for &i in pattern.iter().rev() {
                let s = row_to_step[i];
                if s == usize::MAX {
                    continue;
                }
                let xi = x[i];
                if xi == T::zero() {
                    continue;
                }
                for k in l_colptr[s]..l_colptr[s + 1] {
                    x[l_rows[k]] -= l_vals[k] * xi;
                }
            }

            // Pivot: largest magnitude among not-yet-pivoted rows.
            let mut best = usize::MAX;
            let mut best_mag = -1.0;
            for &i in &pattern {
                if row_to_step[i] == usize::MAX {
                    let m = x[i].abs_s();
                    if m > best_mag {
                        best_mag = m;
                        best = i;
                    }
                }
            }
            if best == usize::MAX || best_mag <= pivot_tol {
                return Err(Error::Singular {
                    index: j,
                    pivot: best_mag.max(0.0),
                });
            }
            let pivot = x[best];
            pivot_rows[j] = best;
            row_to_step[best] = j;

            // Emit U column (steps < j first, diagonal last) and L column.
            for &i in &pattern {
                let s = row_to_step[i];
                if s != usize::MAX && s < j {
                    if x[i] != T::zero() {
                        u_steps.push(s);
                        u_vals.push(x[i]);
                    }
                }
            }
            u_steps.push(j);
            u_vals.push(pivot);
            u_colptr.push(u_steps.len());

            for &i in &pattern {
                if row_to_step[i] == usize::MAX && x[i] != T::zero() {
                    l_rows.push(i);
                    l_vals.push(x[i] / pivot);
                }
            }
            l_colptr.push(l_rows.len());

            for &i in &pattern {
                x[i] = T::zero();
            }
        }

        Ok(LuFactor {
            n,
            rcm,
            l_colptr,
            l_rows,
            l_vals,
            u_colptr,
            u_steps,
            u_vals,
            pivot_rows,
            row_to_step,
            row_scale,
            norm_a,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn norm_a(&self) -> f64 {
        self.norm_a
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::invalid_argument("rhs length mismatch"));
        }
        let n = self.n;
        // Permute into RCM space, applying the row equilibration.
        let mut c = vec![T::zero(); n];
        for i in 0..n {
            let r = self.rcm[i];
            c[i] = b[r] * T::from_f64_s(self.row_scale[r]);
        }
        // Forward: L w = P c (w indexed by step).
        let mut w = vec![T::zero(); n];
        for s in 0..n {
            let ws = c[self.pivot_rows[s]];
            w[s] = ws;
            if ws == T::zero() {
                continue;
            }
            for k in self.l_colptr[s]..self.l_colptr[s + 1] {
                c[self.l_rows[k]] -= self.l_vals[k] * ws;
            }
        }
        // Backward: U y = w (y indexed by column of the permuted matrix).
        let mut y = vec![T::zero(); n];
        for j in (0..n).rev() {
            let lo = self.u_colptr[j];
            let hi = self.u_colptr[j + 1];
            let diag = self.u_vals[hi - 1];
            let yj = w[j] / diag;
            y[j] = yj;
            if yj == T::zero() {
                continue;
            }
            for k in lo..hi - 1 {
                w[self.u_steps[k]] -= self.u_vals[k] * yj;
            }
        }
        // Undo RCM.
        let mut xout = vec![T::zero(); n];
        for j in 0..n {
            xout[self.rcm[j]] = y[j];
        }
        Ok(xout)
    }

    /// Solves Aᴴ x = b using the same factors.
    pub fn solve_adjoint(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::invalid_argument("rhs length mismatch"));
        }
        let n = self.n;
        let mut c = vec![T::zero(); n];
        for i in 0..n {
            c[i] = b[self.rcm[i]];
        }
        // Uᴴ t = c (Uᴴ lower triangular over (column j, step s)).
        let mut t = vec![T::zero(); n];
        for j in 0..n {
            let lo = self.u_colptr[j];
            let hi = self.u_colptr[j + 1];
            let mut acc = c[j];
            for k in lo..hi - 1 {
                acc -= self.u_vals[k].conj_s() * t[self.u_steps[k]];
            }
            t[j] = acc / self.u_vals[hi - 1].conj_s();
        }
        // Lᴴ z = t (z indexed by step, gather over L columns).
        let mut z = vec![T::zero(); n];
        for s in (0..n).rev() {
            let mut acc = t[s];
            for k in self.l_colptr[s]..self.l_colptr[s + 1] {
                let step2 = self.row_to_step[self.l_rows[k]];
                acc -= self.l_vals[k].conj_s() * z[step2];
            }
            z[s] = acc;
        }
        // Pᵀ then undo RCM: y[pivot_rows[s]] = z[s]; x[rcm[i]] = y[i].
        // The factored matrix is D A, so Aᴴ x = b is solved by scaling the
        // result of (D A)ᴴ y = b with D.
        let mut xout = vec![T::zero(); n];
        for s in 0..n {
            let r = self.rcm[self.pivot_rows[s]];
            xout[r] = z[s] * T::from_f64_s(self.row_scale[r]);
        }
        Ok(xout)
    }

    pub fn nnz(&self) -> usize {
        self.l_vals.len() + self.u_vals.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense;
    use num_complex::Complex64;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_solve() {
        let a: SparseMatrix<f64> = SparseMatrix::identity(5);
        let lu = LuFactor::new(&a).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn two_by_two_hand_solve() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
        )
        .unwrap();
        let x = crate::linalg::lu_solve(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_diagonal_solve() {
        let i = Complex64::new(0.0, 1.0);
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, i), (1, 1, i), (2, 2, i)]).unwrap();
        let b = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-1.0, 1.0),
        ];
        let x = crate::linalg::lu_solve(&a, &b).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            let expect = -i * bi;
            assert!((xi - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)],
        )
        .unwrap();
        match LuFactor::new(&a) {
            Err(Error::Singular { .. }) => {}
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn random_real_solve_matches_dense() {
        let mut rng = StdRng::seed_from_u64(7);
        let n = 60;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 4.0 + rng.gen::<f64>()));
            for _ in 0..4 {
                let j = rng.gen_range(0..n);
                trips.push((i, j, rng.gen::<f64>() - 0.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trips).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let x = crate::linalg::lu_solve(&a, &b).unwrap();
        let xd = dense::dense_solve(&a.to_dense(), &b).unwrap();
        for (xi, di) in x.iter().zip(&xd) {
            assert!((xi - di).abs() < 1e-9, "{xi} vs {di}");
        }
        // Residual contract.
        let ax = a.matvec(&x);
        let rnorm: f64 = ax
            .iter()
            .zip(&b)
            .map(|(ai, bi)| (ai - bi) * (ai - bi))
            .sum::<f64>()
            .sqrt();
        let xnorm = crate::linalg::norm2_r(&x);
        let bnorm = crate::linalg::norm2_r(&b);
        assert!(rnorm <= 1e-10 * (a.norm_max() * xnorm + bnorm));
    }

    #[test]
    fn random_complex_adjoint_solve() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 40;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, Complex64::new(3.0 + rng.gen::<f64>(), rng.gen::<f64>())));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                trips.push((
                    i,
                    j,
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
                ));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trips).unwrap();
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let lu = LuFactor::new(&a).unwrap();
        let x = lu.solve_adjoint(&b).unwrap();
        // Check Aᴴ x = b directly.
        let mut r = b.clone();
        for i in 0..n {
            for (j, v) in a.row(i) {
                r[j] -= v.conj() * x[i];
            }
        }
        let rnorm = crate::linalg::norm2_c(&r);
        assert!(rnorm < 1e-9 * crate::linalg::norm2_c(&b).max(1.0));
    }
}
