//! Smallest singular value of an operator measured in a positive
//! semidefinite Gram seminorm on both sides, restricted to the G-positive
//! subspace.
//!
//! The estimate is computed by block inverse iteration on the pencil
//! (WᴴGW, G): each step applies T = W⁻¹ G⁺ W⁻ᴴ G with G-inner products,
//! whose dominant eigenvalue is 1/σ_min². The Gram enters only through the
//! [`GramSeminorm`] trait (application, pseudo-inverse, kernel projection),
//! so structured Grams can supply an efficient blockwise pseudo-inverse.

use super::{dense, dot_c, LuFactor, SparseMatrix, Triplets};
use crate::error::{Error, Result};
use num_complex::Complex64;
use num_traits::Zero;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Operations a PSD Gram seminorm must provide for the singular-value
/// iteration: application G x, the pseudo-inverse G⁺ b for b in range(G),
/// and the Euclidean projection off ker(G).
pub trait GramSeminorm {
    fn dim(&self) -> usize;
    fn apply_c(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn pinv_c(&self, b: &[Complex64]) -> Result<Vec<Complex64>>;
    fn project_c(&self, x: &mut [Complex64]);

    /// xᴴ G y.
    fn gram_dot(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        dot_c(x, &self.apply_c(y))
    }
}

/// Generic Gram seminorm backed by a bordered factorization with the given
/// kernel basis. Suitable for definite Grams and for small deflated
/// problems; large Grams with dense kernel vectors should provide a
/// structured [`GramSeminorm`] instead, since the dense border columns
/// inflate the factorization.
pub struct GramOps<'a> {
    g: &'a SparseMatrix<f64>,
    solver: LuFactor<f64>,
    kernel: Vec<Vec<f64>>,
    n: usize,
}

impl<'a> GramOps<'a> {
    /// `kernel` spans ker(G); pass an empty slice for a definite Gram. The
    /// basis is orthonormalized internally.
    pub fn new(g: &'a SparseMatrix<f64>, kernel: &[Vec<f64>]) -> Result<Self> {
        let n = g.nrows();
        if n != g.ncols() {
            return Err(Error::invalid_argument("Gram must be square"));
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in kernel {
            let mut w = v.clone();
            for _pass in 0..2 {
                for b in &basis {
                    let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= c * bi;
                    }
                }
            }
            let nrm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-12 {
                for wi in &mut w {
                    *wi /= nrm;
                }
                basis.push(w);
            }
        }
        let kdim = basis.len();
        let solver = if kdim == 0 {
            LuFactor::new(g)?
        } else {
            // Bordered system [[G, Q], [Qᵀ, -I/τ]] realizes (G + τQQᵀ)⁻¹ on
            // range(G) exactly, with τ at the scale of G.
            let tau = g.norm_max().max(1.0);
            let mut trips = Triplets::new();
            for r in 0..n {
                for (c, v) in g.row(r) {
                    trips.push(r, c, v);
                }
            }
            for (j, q) in basis.iter().enumerate() {
                for (i, &qi) in q.iter().enumerate() {
                    if qi != 0.0 {
                        trips.push(i, n + j, qi);
                        trips.push(n + j, i, qi);
                    }
                }
                trips.push(n + j, n + j, -1.0 / tau);
            }
            LuFactor::new(&trips.build(n + kdim, n + kdim)?)?
        };
        Ok(GramOps {
            g,
            solver,
            kernel: basis,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.g.matvec_c(x)
    }

    /// xᴴ G y.
    pub fn dot(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        dot_c(x, &self.g.matvec_c(y))
    }

    pub fn seminorm(&self, x: &[Complex64]) -> f64 {
        self.dot(x, x).re.max(0.0).sqrt()
    }

    /// Removes the Euclidean kernel components.
    pub fn project_c(&self, x: &mut [Complex64]) {
        for q in &self.kernel {
            let mut c = Complex64::zero();
            for (xi, &qi) in x.iter().zip(q) {
                c += xi.scale(qi);
            }
            for (xi, &qi) in x.iter_mut().zip(q) {
                *xi -= c.scale(qi);
            }
        }
    }

    /// Solves (G + τ Π_ker) y = b for b in range(G); combined with the
    /// projection this is the pseudo-inverse of G.
    pub fn solve_reg_c(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let kdim = self.kernel.len();
        let total = self.n + kdim;
        let solve_part = |part: Vec<f64>| -> Result<Vec<f64>> {
            let mut rhs = part;
            rhs.resize(total, 0.0);
            let sol = self.solver.solve(&rhs)?;
            Ok(sol[..self.n].to_vec())
        };
        let re = solve_part(b.iter().map(|z| z.re).collect())?;
        let im = solve_part(b.iter().map(|z| z.im).collect())?;
        let mut out: Vec<Complex64> = re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
        GramSeminorm::project_c(self, &mut out);
        Ok(out)
    }
}

impl<'a> GramSeminorm for GramOps<'a> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        GramOps::apply_c(self, x)
    }

    fn pinv_c(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_reg_c(b)
    }

    fn project_c(&self, x: &mut [Complex64]) {
        GramOps::project_c(self, x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SingularEstimate {
    pub sigma_min: f64,
    /// True when the operator was singular on the subspace.
    pub singular_flag: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GramIterOptions {
    pub block: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for GramIterOptions {
    fn default() -> Self {
        GramIterOptions {
            block: 3,
            tol: 1e-6,
            max_iters: 3000,
            seed: 0x1234_5678,
        }
    }
}

/// Smallest G-singular value of an operator W given through solves with W
/// and Wᴴ. Returns (sigma_min, iterations).
pub fn gram_smallest_singular(
    solve: &dyn Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    solve_adj: &dyn Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    gram: &dyn GramSeminorm,
    opts: &GramIterOptions,
) -> Result<(f64, usize)> {
    let n = gram.dim();
    let block = opts.block.max(1).min(n);
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<Complex64>> = (0..block)
        .map(|_| {
            let mut col: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            gram.project_c(&mut col);
            col
        })
        .collect();
    g_orthonormalize(gram, &mut x);

    let mut theta_prev = f64::NAN;
    let mut calm = 0usize;
    for iter in 1..=opts.max_iters {
        // Z = T X with T = W⁻¹ G⁺ W⁻ᴴ G.
        let mut z: Vec<Vec<Complex64>> = Vec::with_capacity(block);
        for col in &x {
            let g1 = gram.apply_c(col);
            let u = solve_adj(&g1)?;
            let v = gram.pinv_c(&u)?;
            let mut y = solve(&v)?;
            gram.project_c(&mut y);
            z.push(y);
        }
        // Ritz values of T in the G-orthonormal basis X.
        let gz: Vec<Vec<Complex64>> = z.iter().map(|c| gram.apply_c(c)).collect();
        let mut proj = vec![vec![Complex64::zero(); block]; block];
        for i in 0..block {
            for j in 0..block {
                proj[i][j] = dot_c(&x[i], &gz[j]);
            }
        }
        for i in 0..block {
            for j in i..block {
                let s = (proj[i][j] + proj[j][i].conj()).scale(0.5);
                proj[i][j] = s;
                proj[j][i] = s.conj();
            }
        }
        let (theta, q) = dense::jacobi_hermitian(&proj);
        let theta_max = theta[block - 1].max(0.0);

        // Rotate Z into Ritz order (dominant first) and restart from it.
        let mut xn: Vec<Vec<Complex64>> = vec![vec![Complex64::zero(); n]; block];
        for (slot, jr) in (0..block).rev().enumerate() {
            for (i, zi) in z.iter().enumerate() {
                let c = q[i][jr];
                if c != Complex64::zero() {
                    for (row, v) in zi.iter().enumerate() {
                        xn[slot][row] += c * v;
                    }
                }
            }
        }
        x = xn;
        g_orthonormalize(gram, &mut x);

        if theta_prev.is_finite() && theta_max > 0.0 {
            let change = (theta_max - theta_prev).abs() / theta_max;
            if change <= 0.5 * opts.tol {
                calm += 1;
                if calm >= 2 && iter >= 5 {
                    return Ok((1.0 / theta_max.sqrt(), iter));
                }
            } else {
                calm = 0;
            }
        }
        theta_prev = theta_max;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual: theta_prev,
    })
}

fn g_orthonormalize(gram: &dyn GramSeminorm, cols: &mut [Vec<Complex64>]) {
    let k = cols.len();
    for _pass in 0..2 {
        let mut g_cols: Vec<Vec<Complex64>> = Vec::with_capacity(k);
        for i in 0..k {
            for j in 0..i {
                // <q_j, x_i>_G with G real symmetric.
                let c = dot_c(&g_cols[j], &cols[i]);
                let colj = cols[j].clone();
                for (xi, cj) in cols[i].iter_mut().zip(&colj) {
                    *xi -= c * cj;
                }
            }
            let gi = gram.apply_c(&cols[i]);
            let nrm = dot_c(&cols[i], &gi).re.max(0.0).sqrt();
            if nrm > 1e-150 {
                for xi in cols[i].iter_mut() {
                    *xi = xi.scale(1.0 / nrm);
                }
                g_cols.push(gi.iter().map(|v| v.scale(1.0 / nrm)).collect());
            } else {
                g_cols.push(gi);
            }
        }
    }
}

/// Smallest singular value of the sparse complex matrix `c` in the
/// seminorm of the PSD Gram `g` on both sides. A structurally or
/// numerically singular `c` yields `sigma_min = 0` with the flag set.
pub fn smallest_singular_in_norm(
    c: &SparseMatrix<Complex64>,
    g: &SparseMatrix<f64>,
) -> Result<SingularEstimate> {
    smallest_singular_in_norm_deflated(c, g, &[])
}

/// Same as [`smallest_singular_in_norm`] with an explicit kernel basis for
/// the Gram seminorm.
pub fn smallest_singular_in_norm_deflated(
    c: &SparseMatrix<Complex64>,
    g: &SparseMatrix<f64>,
    kernel: &[Vec<f64>],
) -> Result<SingularEstimate> {
    let lu = match LuFactor::new(c) {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => {
            return Ok(SingularEstimate {
                sigma_min: 0.0,
                singular_flag: true,
                iterations: 0,
            })
        }
        Err(e) => return Err(e),
    };
    let gram = GramOps::new(g, kernel)?;
    let opts = GramIterOptions::default();
    let (sigma, iterations) = gram_smallest_singular(
        &|b| lu.solve(b),
        &|b| lu.solve_adjoint(b),
        &gram,
        &opts,
    )?;
    Ok(SingularEstimate {
        sigma_min: sigma,
        singular_flag: false,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complex_id(n: usize, scale: f64) -> SparseMatrix<Complex64> {
        let trips: Vec<(usize, usize, Complex64)> = (0..n)
            .map(|i| (i, i, Complex64::new(scale, 0.0)))
            .collect();
        SparseMatrix::from_triplets(n, n, &trips).unwrap()
    }

    #[test]
    fn identity_has_unit_sigma() {
        let c = complex_id(10, 1.0);
        let g: SparseMatrix<f64> = SparseMatrix::identity(10);
        let est = smallest_singular_in_norm(&c, &g).unwrap();
        assert!((est.sigma_min - 1.0).abs() < 1e-6);
        assert!(!est.singular_flag);
    }

    #[test]
    fn scaling_doubles_sigma() {
        let c = complex_id(10, 2.0);
        let g: SparseMatrix<f64> = SparseMatrix::identity(10);
        let est = smallest_singular_in_norm(&c, &g).unwrap();
        assert!((est.sigma_min - 2.0).abs() < 2e-6);
    }

    #[test]
    fn random_complex_matches_dense_svd() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        let n = 30;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, Complex64::new(2.0 + rng.gen::<f64>(), rng.gen::<f64>())));
            for _ in 0..5 {
                let j = rng.gen_range(0..n);
                trips.push((
                    i,
                    j,
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
                ));
            }
        }
        let c = SparseMatrix::from_triplets(n, n, &trips).unwrap();
        let g: SparseMatrix<f64> = SparseMatrix::identity(n);
        let est = smallest_singular_in_norm(&c, &g).unwrap();
        let sv = dense::singular_values(&c.to_dense());
        let smin = sv.last().copied().unwrap();
        assert!(
            (est.sigma_min - smin).abs() <= 1e-6 * smin,
            "{} vs {}",
            est.sigma_min,
            smin
        );
    }

    #[test]
    fn singular_matrix_flags() {
        let mut trips = vec![(0usize, 0usize, Complex64::new(1.0, 0.0))];
        trips.push((1, 1, Complex64::zero()));
        let c = SparseMatrix::from_triplets(2, 2, &trips).unwrap();
        let g: SparseMatrix<f64> = SparseMatrix::identity(2);
        let est = smallest_singular_in_norm(&c, &g).unwrap();
        assert!(est.singular_flag);
        assert_eq!(est.sigma_min, 0.0);
    }

    #[test]
    fn weighted_case_matches_dense_oracle() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        let n = 16;
        let mut ctrips = Vec::new();
        for i in 0..n {
            ctrips.push((i, i, Complex64::new(1.5 + rng.gen::<f64>(), 0.3)));
            let j = rng.gen_range(0..n);
            ctrips.push((
                i,
                j,
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            ));
        }
        let c = SparseMatrix::from_triplets(n, n, &ctrips).unwrap();
        // SPD Gram: tridiagonal mass-like matrix.
        let mut gtrips = Vec::new();
        for i in 0..n {
            gtrips.push((i, i, 2.0));
            if i + 1 < n {
                gtrips.push((i, i + 1, 0.5));
                gtrips.push((i + 1, i, 0.5));
            }
        }
        let g = SparseMatrix::from_triplets(n, n, &gtrips).unwrap();
        let est = smallest_singular_in_norm(&c, &g).unwrap();
        let sv = dense::gram_singular_values(&c.to_dense(), &g.to_dense());
        let smin = sv.last().copied().unwrap();
        assert!(
            (est.sigma_min - smin).abs() <= 2e-6 * smin,
            "{} vs {}",
            est.sigma_min,
            smin
        );
    }
}
