//! Generalized symmetric eigensolver: smallest eigenvalues of A x = λ M x
//! by shift-invert subspace iteration with full reorthogonalization.

use super::{dense, LuFactor, SparseMatrix};
use crate::error::{Error, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Extra subspace vectors beyond the requested count.
    pub block_extra: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-9,
            max_iters: 400,
            block_extra: 8,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Eigenvalues ascending.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors, one inner Vec per eigenpair.
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals ‖Ax − λMx‖ / (‖A‖ ‖x‖).
    pub residuals: Vec<f64>,
}

/// Smallest `k` eigenpairs of the coercive symmetric pencil (A, M) with M
/// positive definite on the solve subspace. Vectors come back M-orthonormal
/// and eigenvalues ascending.
pub fn sym_eig_smallest(
    a: &SparseMatrix<f64>,
    m: &SparseMatrix<f64>,
    k: usize,
    opts: &EigenOptions,
) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if k == 0 {
        return Err(Error::invalid_argument("k must be at least 1"));
    }
    if n != a.ncols() || n != m.nrows() || n != m.ncols() {
        return Err(Error::invalid_argument("pencil matrices must be square and equal-sized"));
    }
    if k > n {
        return Err(Error::invalid_argument(format!("k = {k} exceeds dimension {n}")));
    }
    let block = (k + opts.block_extra.max(4)).min(n);
    let lu = LuFactor::new(a)?;
    let _norm_a = a.norm_max();

    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    m_orthonormalize(m, &mut x);

    let mut eigen = GeneralizedEigen {
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
    };
    let mut worst = f64::INFINITY;
    for _iter in 0..opts.max_iters {
        // Shift-invert step at sigma = 0: Y = A^{-1} M X.
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(block);
        for col in &x {
            y.push(lu.solve(&m.matvec(col))?);
        }
        m_orthonormalize(m, &mut y);

        // Rayleigh-Ritz on the pencil in the M-orthonormal basis.
        let ay: Vec<Vec<f64>> = y.iter().map(|col| a.matvec(col)).collect();
        let mut proj = vec![vec![0.0; block]; block];
        for i in 0..block {
            for j in 0..block {
                proj[i][j] = dot(&y[i], &ay[j]);
            }
        }
        for i in 0..block {
            for j in i + 1..block {
                let s = 0.5 * (proj[i][j] + proj[j][i]);
                proj[i][j] = s;
                proj[j][i] = s;
            }
        }
        let (theta, q) = dense::jacobi_symmetric(&proj);

        // Rotate the basis to the Ritz vectors.
        let mut xn: Vec<Vec<f64>> = vec![vec![0.0; n]; block];
        for (j, xnj) in xn.iter_mut().enumerate() {
            for (i, yi) in y.iter().enumerate() {
                let c = q[i][j];
                if c != 0.0 {
                    for (row, v) in yi.iter().enumerate() {
                        xnj[row] += c * v;
                    }
                }
            }
        }
        x = xn;

        // Residuals of the first k Ritz pairs, scaled pair-locally so the
        // test is meaningful for matrices whose entries span many orders
        // of magnitude.
        worst = 0.0;
        let mut values = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for j in 0..k {
            let ax = a.matvec(&x[j]);
            let mx = m.matvec(&x[j]);
            let mut r2 = 0.0;
            let mut ax2 = 0.0;
            let mut mx2 = 0.0;
            for row in 0..n {
                let r = ax[row] - theta[j] * mx[row];
                r2 += r * r;
                ax2 += ax[row] * ax[row];
                mx2 += mx[row] * mx[row];
            }
            let scale = (ax2.sqrt() + theta[j].abs() * mx2.sqrt()).max(1e-300);
            let rel = r2.sqrt() / scale;
            residuals.push(rel);
            values.push(theta[j]);
            worst = worst.max(rel);
        }
        if worst <= opts.tol {
            eigen.values = values;
            eigen.residuals = residuals;
            eigen.vectors = x.into_iter().take(k).collect();
            return Ok(eigen);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual: worst,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt in the M inner product, two passes.
fn m_orthonormalize(m: &SparseMatrix<f64>, cols: &mut [Vec<f64>]) {
    let k = cols.len();
    for _pass in 0..2 {
        let mut m_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        for i in 0..k {
            for j in 0..i {
                let c = dot(&cols[i], &m_cols[j]);
                let colj = cols[j].clone();
                for (xi, cj) in cols[i].iter_mut().zip(&colj) {
                    *xi -= c * cj;
                }
            }
            let mi = m.matvec(&cols[i]);
            let nrm = dot(&cols[i], &mi).sqrt();
            if nrm > 1e-300 {
                for xi in cols[i].iter_mut() {
                    *xi /= nrm;
                }
                m_cols.push(mi.iter().map(|v| v / nrm).collect());
            } else {
                m_cols.push(mi);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)])
            .unwrap();
        let m: SparseMatrix<f64> = SparseMatrix::identity(3);
        let res = sym_eig_smallest(&a, &m, 1, &EigenOptions::default()).unwrap();
        assert!((res.values[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identical_pencil_all_ones() {
        let a = SparseMatrix::from_triplets(
            4,
            4,
            &[
                (0, 0, 2.0),
                (1, 1, 2.0),
                (2, 2, 2.0),
                (3, 3, 2.0),
                (0, 1, -0.5),
                (1, 0, -0.5),
                (2, 3, 0.25),
                (3, 2, 0.25),
            ],
        )
        .unwrap();
        let res = sym_eig_smallest(&a, &a, 3, &EigenOptions::default()).unwrap();
        for v in &res.values {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn random_spd_pencil_matches_dense_oracle() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        let n = 24;
        // A = Bᵀ B + I, M = diag(positive) as a simple SPD pencil.
        let mut bmat = vec![vec![0.0f64; n]; n];
        for row in bmat.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen::<f64>() - 0.5;
            }
        }
        let mut trips_a = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for (k, brow) in bmat.iter().enumerate() {
                    let _ = k;
                    acc += brow[i] * brow[j];
                }
                if i == j {
                    acc += 1.0;
                }
                trips_a.push((i, j, acc));
            }
        }
        let mut trips_m = Vec::new();
        let mut mdiag = vec![0.0; n];
        for (i, d) in mdiag.iter_mut().enumerate() {
            *d = 0.5 + rng.gen::<f64>();
            trips_m.push((i, i, *d));
        }
        let a = SparseMatrix::from_triplets(n, n, &trips_a).unwrap();
        let m = SparseMatrix::from_triplets(n, n, &trips_m).unwrap();
        let k = 5;
        let res = sym_eig_smallest(&a, &m, k, &EigenOptions::default()).unwrap();

        // Dense oracle: eigenvalues of D^{-1/2} A D^{-1/2}.
        let mut sym = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                sym[i][j] = a.get(i, j) / (mdiag[i] * mdiag[j]).sqrt();
            }
        }
        let (dense_eigs, _) = dense::jacobi_symmetric(&sym);
        for j in 0..k {
            assert!(
                (res.values[j] - dense_eigs[j]).abs() < 1e-8 * dense_eigs[j].abs().max(1.0),
                "{} vs {}",
                res.values[j],
                dense_eigs[j]
            );
        }
        // M-orthonormality.
        for i in 0..k {
            for j in 0..k {
                let mij: f64 = res.vectors[i]
                    .iter()
                    .enumerate()
                    .map(|(r, &v)| v * mdiag[r] * res.vectors[j][r])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((mij - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalues_invariant_under_symmetric_permutation() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 3.0), (1, 1, 5.0), (2, 2, 7.0), (0, 2, 1.0), (2, 0, 1.0)],
        )
        .unwrap();
        let m: SparseMatrix<f64> = SparseMatrix::identity(3);
        // Permutation (2, 0, 1).
        let perm = [2usize, 0, 1];
        let mut trips = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                let v = a.get(i, j);
                if v != 0.0 {
                    trips.push((perm[i], perm[j], v));
                }
            }
        }
        let ap = SparseMatrix::from_triplets(3, 3, &trips).unwrap();
        let r1 = sym_eig_smallest(&a, &m, 2, &EigenOptions::default()).unwrap();
        let r2 = sym_eig_smallest(&ap, &m, 2, &EigenOptions::default()).unwrap();
        for (x, y) in r1.values.iter().zip(&r2.values) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
