//! Dense fallbacks: LU solve, Jacobi eigensolvers, Gram-weighted singular
//! values. These serve as independent oracles in tests and as the small
//! Rayleigh-Ritz kernels inside the iterative solvers; the main pipeline
//! never factors a large dense matrix.

use super::Scalar;
use crate::error::{Error, Result};
use num_complex::Complex64;
use num_traits::Zero;

/// Dense LU solve with partial pivoting.
pub fn dense_solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>> {
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut x: Vec<T> = b.to_vec();
    for k in 0..n {
        let (piv, mag) = (k..n)
            .map(|i| (i, m[i][k].abs_s()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if mag < 1e-300 {
            return Err(Error::Singular {
                index: k,
                pivot: mag,
            });
        }
        m.swap(k, piv);
        x.swap(k, piv);
        let d = m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / d;
            if f == T::zero() {
                continue;
            }
            for j in k + 1..n {
                let mkj = m[k][j];
                m[i][j] -= f * mkj;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in k + 1..n {
            acc -= m[k][j] * x[j];
        }
        x[k] = acc / m[k][k];
    }
    Ok(x)
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
/// Returns eigenvalues ascending with matching orthonormal eigenvector
/// columns.
pub fn jacobi_symmetric(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        v[i][i] = 1.0;
    }
    let off = |m: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += m[i][j] * m[i][j];
            }
        }
        s.sqrt()
    };
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(1e-300);
    for _sweep in 0..100 {
        if off(&m) <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let mut vectors = vec![vec![0.0; n]; n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k][new] = v[k][old];
        }
    }
    (eigenvalues, vectors)
}

/// Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.
/// Returns real eigenvalues ascending and unitary eigenvector columns.
pub fn jacobi_hermitian(a: &[Vec<Complex64>]) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let n = a.len();
    let mut m: Vec<Vec<Complex64>> = a.to_vec();
    let mut v = vec![vec![Complex64::zero(); n]; n];
    for i in 0..n {
        v[i][i] = Complex64::new(1.0, 0.0);
    }
    let off = |m: &[Vec<Complex64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += m[i][j].norm_sqr();
            }
        }
        s.sqrt()
    };
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.norm()))
        .max(1e-300);
    for _sweep in 0..120 {
        if off(&m) <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // Unitary rotation diagonalizing the 2x2 Hermitian block:
                // columns (p, q) mix with coefficients (c, s e^{i phi}).
                let phase = apq / mag;
                let app = m[p][p].re;
                let aqq = m[q][q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = [[c, s*phase], [-s*conj(phase), c]] applied as M <- Gᴴ M G.
                let gpp = Complex64::new(c, 0.0);
                let gpq = phase.scale(s);
                let gqp = -phase.conj().scale(s);
                let gqq = Complex64::new(c, 0.0);
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = mkp * gpp + mkq * gqp;
                    m[k][q] = mkp * gpq + mkq * gqq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = gpp.conj() * mpk + gqp.conj() * mqk;
                    m[q][k] = gpq.conj() * mpk + gqq.conj() * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = vkp * gpp + vkq * gqp;
                    v[k][q] = vkp * gpq + vkq * gqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].re.partial_cmp(&m[j][j].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i][i].re).collect();
    let mut vectors = vec![vec![Complex64::zero(); n]; n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k][new] = v[k][old];
        }
    }
    (eigenvalues, vectors)
}

/// Singular values of a dense complex matrix, descending, via the Hermitian
/// eigendecomposition of AᴴA.
pub fn singular_values(a: &[Vec<Complex64>]) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let m = a[0].len();
    let mut ata = vec![vec![Complex64::zero(); m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = Complex64::zero();
            for k in 0..n {
                acc += a[k][i].conj() * a[k][j];
            }
            ata[i][j] = acc;
        }
    }
    let (eigs, _) = jacobi_hermitian(&ata);
    let mut out: Vec<f64> = eigs.iter().map(|&e| e.max(0.0).sqrt()).collect();
    out.reverse();
    out
}

/// Singular values of `c` measured in the seminorm of the symmetric PSD
/// Gram `g` on both sides, restricted to the G-positive subspace. Used as a
/// dense oracle for the sparse iteration.
pub fn gram_singular_values(c: &[Vec<Complex64>], g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    let (evals, evecs) = jacobi_symmetric(g);
    let gmax = evals.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let keep: Vec<usize> = (0..n).filter(|&i| evals[i] > 1e-12 * gmax).collect();
    let k = keep.len();
    if k == 0 {
        return Vec::new();
    }
    // S = D^{1/2} Qᵀ C Q D^{-1/2} on the kept subspace.
    let mut s = vec![vec![Complex64::zero(); k]; k];
    for (col, &jc) in keep.iter().enumerate() {
        // w = C * (q_jc / sqrt(d_jc))
        let dje = evals[jc].sqrt();
        let mut w = vec![Complex64::zero(); n];
        for r in 0..n {
            let mut acc = Complex64::zero();
            for c2 in 0..n {
                acc += c[r][c2].scale(evecs[c2][jc] / dje);
            }
            w[r] = acc;
        }
        for (row, &ir) in keep.iter().enumerate() {
            let mut acc = Complex64::zero();
            for r in 0..n {
                acc += w[r].scale(evecs[r][ir]);
            }
            s[row][col] = acc.scale(evals[ir].sqrt());
        }
    }
    singular_values(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn jacobi_symmetric_diagonalizes() {
        let a = vec![
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let (eigs, vecs) = jacobi_symmetric(&a);
        // Known eigenvalues 2 - sqrt(2), 2, 2 + sqrt(2).
        let expect = [2.0 - 2.0f64.sqrt(), 2.0, 2.0 + 2.0f64.sqrt()];
        for (e, x) in eigs.iter().zip(expect) {
            assert!((e - x).abs() < 1e-12);
        }
        // Residual A v = lambda v.
        for j in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|k| a[i][k] * vecs[k][j]).sum();
                assert!((av - eigs[j] * vecs[i][j]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn hermitian_jacobi_matches_real_case() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = 8;
        let mut a = vec![vec![Complex64::zero(); n]; n];
        let mut ar = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let x = rng.gen::<f64>() - 0.5;
                a[i][j] = Complex64::new(x, 0.0);
                a[j][i] = Complex64::new(x, 0.0);
                ar[i][j] = x;
                ar[j][i] = x;
            }
        }
        let (ec, _) = jacobi_hermitian(&a);
        let (er, _) = jacobi_symmetric(&ar);
        for (x, y) in ec.iter().zip(&er) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn hermitian_jacobi_complex_residual() {
        let mut rng = StdRng::seed_from_u64(4);
        let n = 10;
        let mut a = vec![vec![Complex64::zero(); n]; n];
        for i in 0..n {
            a[i][i] = Complex64::new(rng.gen::<f64>(), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                a[i][j] = z;
                a[j][i] = z.conj();
            }
        }
        let (eigs, vecs) = jacobi_hermitian(&a);
        for j in 0..n {
            for i in 0..n {
                let av: Complex64 = (0..n).map(|k| a[i][k] * vecs[k][j]).sum();
                assert!((av - vecs[i][j].scale(eigs[j])).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let a = vec![
            vec![Complex64::new(0.0, 3.0), Complex64::zero()],
            vec![Complex64::zero(), Complex64::new(-2.0, 0.0)],
        ];
        let sv = singular_values(&a);
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 2.0).abs() < 1e-12);
    }
}
