//! The first-order generator of the coupled system.
//!
//! The state U = (x, y, η, ξ, ζ) carries the tied displacement field x
//! (u on the wave dofs, w on the plate dofs), its velocity y and the three
//! boundary controls. The evolution E U̇ = B U holds in weak form with
//!
//! ```text
//!   ẋ = y                                   (coefficient-wise)
//!   M ẏ = -K x - T1ᵀG1 η - T2nᵀG2n ξ - T2vᵀG2v ζ
//!   G1 η̇  = G1 (T1 y - η)
//!   G2n ξ̇ = G2n (T2n y - ξ)
//!   G2v ζ̇ = G2v (T2v y - ζ)
//! ```
//!
//! so the discrete energy E(U) = ½ Uᵀ M_H U obeys the exact dissipation
//! identity Re⟨A U, U⟩_H = -(ηᵀG1η + ξᵀG2nξ + ζᵀG2vζ): the interface terms
//! cancel structurally through the shared dofs, just as the continuous
//! transmission conditions cancel in the summed variational form.

use crate::error::{Error, Result};
use crate::fem::{assemble_forms, assemble_h_gram, rigid_basis, DofMap, FormSet};
use crate::linalg::{LuFactor, SparseMatrix, Triplets};
use crate::mesh::TriMesh;
use num_complex::Complex64;
use num_traits::Zero;

/// Energy split across the seven physical contributions.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyBreakdown {
    pub wave_potential: f64,
    pub wave_kinetic: f64,
    pub eta: f64,
    pub plate_bending: f64,
    pub plate_kinetic: f64,
    pub xi: f64,
    pub zeta: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.wave_potential
            + self.wave_kinetic
            + self.eta
            + self.plate_bending
            + self.plate_kinetic
            + self.xi
            + self.zeta
    }
}

/// Dissipation split per control.
#[derive(Debug, Clone, Copy, Default)]
pub struct DissipationBreakdown {
    pub eta: f64,
    pub xi: f64,
    pub zeta: f64,
}

impl DissipationBreakdown {
    pub fn total(&self) -> f64 {
        self.eta + self.xi + self.zeta
    }
}

pub struct GeneratorSystem {
    pub forms: FormSet,
    /// Block Gram of the weak ODE (identity on x, masses elsewhere).
    pub e_mat: SparseMatrix<f64>,
    /// Drift matrix.
    pub b_mat: SparseMatrix<f64>,
    /// Energy Gram.
    pub m_h: SparseMatrix<f64>,
    /// Basis of the two rigid states (kernel of both M_H and B).
    pub rigid: Vec<Vec<f64>>,
    mass_lu: LuFactor<f64>,
    g1_lu: Option<LuFactor<f64>>,
    g2v_lu: Option<LuFactor<f64>>,
    g2n_diag: Vec<f64>,
    mean_proj_x: MeanProjector,
    mean_proj_y: MeanProjector,
    /// Stiffness block K = K1 + K2 with two pinned dofs, realizing the
    /// pseudo-inverse of the singular stiffness on its range.
    k_pin_lu: LuFactor<f64>,
    /// Euclidean-orthonormalized rigid displacement fields (x block only).
    rigid_x_ortho: Vec<Vec<f64>>,
}

/// Minimal-norm correction zeroing the four mean functionals: the Schur
/// complement of [[Q, Cᵀ], [C, 0]] with Q the projection metric, kept as
/// four precomputed solve directions plus a 4x4 dense system.
struct MeanProjector {
    directions: Vec<Vec<f64>>,
    schur: Vec<Vec<f64>>,
}

impl MeanProjector {
    fn new(metric_lu: &LuFactor<f64>, rows: &SparseMatrix<f64>, n: usize) -> Result<Self> {
        let mut directions = Vec::with_capacity(4);
        for r in 0..4 {
            let mut col = vec![0.0; n];
            for (c, v) in rows.row(r) {
                col[c] = v;
            }
            directions.push(metric_lu.solve(&col)?);
        }
        let mut schur = vec![vec![0.0; 4]; 4];
        for r in 0..4 {
            let cw = rows.matvec(&directions[r]);
            for (i, v) in cw.iter().enumerate() {
                schur[i][r] = *v;
            }
        }
        Ok(MeanProjector { directions, schur })
    }

    /// x <- x - Q⁻¹Cᵀ (C Q⁻¹ Cᵀ)⁻¹ C x.
    fn apply(&self, rows: &SparseMatrix<f64>, x: &mut [f64]) -> Result<()> {
        let cx = rows.matvec(x);
        let lambda = crate::linalg::dense::dense_solve(&self.schur, &cx)?;
        for (j, dir) in self.directions.iter().enumerate() {
            if lambda[j] != 0.0 {
                for (xi, di) in x.iter_mut().zip(dir) {
                    *xi -= lambda[j] * di;
                }
            }
        }
        Ok(())
    }
}

pub fn build_generator(mesh: &TriMesh, mu: f64) -> Result<GeneratorSystem> {
    let forms = assemble_forms(mesh, mu)?;
    let d = &forms.dofmap;
    let n = d.n_state();
    let nx = d.n_x;

    let k = SparseMatrix::add_scaled(&forms.k1, 1.0, &forms.k2, 1.0)?;
    let m = SparseMatrix::add_scaled(&forms.m1, 1.0, &forms.m2, 1.0)?;

    let place = |mat: &SparseMatrix<f64>,
                 off_r: usize,
                 off_c: usize,
                 scale: f64,
                 trips: &mut Triplets| {
        for r in 0..mat.nrows() {
            for (c, v) in mat.row(r) {
                trips.push(off_r + r, off_c + c, scale * v);
            }
        }
    };

    // E: identity pairing on the x row, Grams elsewhere.
    let mut e = Triplets::new();
    for i in 0..nx {
        e.push(i, i, 1.0);
    }
    place(&m, d.off_y(), d.off_y(), 1.0, &mut e);
    place(&forms.g1, d.off_eta(), d.off_eta(), 1.0, &mut e);
    place(&forms.g2n, d.off_xi(), d.off_xi(), 1.0, &mut e);
    place(&forms.g2v, d.off_zeta(), d.off_zeta(), 1.0, &mut e);
    let e_mat = e.build(n, n)?;

    // B.
    let mut b = Triplets::new();
    for i in 0..nx {
        b.push(i, d.off_y() + i, 1.0);
    }
    place(&k, d.off_y(), d.off_x(), -1.0, &mut b);
    let g1t1 = forms.g1.matmul(&forms.t1)?;
    let g2nt2n = forms.g2n.matmul(&forms.t2n)?;
    let g2vt2v = forms.g2v.matmul(&forms.t2v)?;
    place(&g1t1.transpose(), d.off_y(), d.off_eta(), -1.0, &mut b);
    place(&g2nt2n.transpose(), d.off_y(), d.off_xi(), -1.0, &mut b);
    place(&g2vt2v.transpose(), d.off_y(), d.off_zeta(), -1.0, &mut b);
    place(&g1t1, d.off_eta(), d.off_y(), 1.0, &mut b);
    place(&forms.g1, d.off_eta(), d.off_eta(), -1.0, &mut b);
    place(&g2nt2n, d.off_xi(), d.off_y(), 1.0, &mut b);
    place(&forms.g2n, d.off_xi(), d.off_xi(), -1.0, &mut b);
    place(&g2vt2v, d.off_zeta(), d.off_y(), 1.0, &mut b);
    place(&forms.g2v, d.off_zeta(), d.off_zeta(), -1.0, &mut b);
    let b_mat = b.build(n, n)?;

    let m_h = assemble_h_gram(&forms)?;
    let rigid = rigid_basis(mesh, d);

    let mass_lu = LuFactor::new(&m)?;
    let g1_lu = (d.n_eta > 0).then(|| LuFactor::new(&forms.g1)).transpose()?;
    let g2v_lu = (d.n_zeta > 0)
        .then(|| LuFactor::new(&forms.g2v))
        .transpose()?;
    let mut g2n_diag = vec![0.0; d.n_xi];
    for (i, gd) in g2n_diag.iter_mut().enumerate() {
        *gd = forms.g2n.get(i, i);
    }

    // Mean projections through Schur complements: the displacement block
    // uses the SPD metric K + M (the energy seminorm regularized by mass),
    // the velocity block the mass itself. Bordering the sparse matrices
    // with the dense functional rows would ruin the factorization fill.
    let kpm = SparseMatrix::add_scaled(&k, 1.0, &m, 1.0)?;
    let kpm_lu = LuFactor::new(&kpm)?;
    let mean_proj_x = MeanProjector::new(&kpm_lu, &forms.mean_rows, nx)?;
    let mean_proj_y = MeanProjector::new(&mass_lu, &forms.mean_rows, nx)?;

    // Pinned stiffness: fixing one wave dof and one plate dof away from the
    // interface line removes the two rigid modes, so solves against the
    // pinned matrix agree with K⁺ on range(K).
    let d2 = &forms.dofmap;
    let pin_a = d2
        .wave_vertex_dof
        .iter()
        .flatten()
        .next()
        .copied()
        .ok_or_else(|| Error::validation("no wave dofs"))?;
    let mut pin_b = None;
    let mut best = 0.0;
    for (v, dof) in d2.plate_vertex_dof.iter().enumerate() {
        if let Some(dd) = dof {
            if d2.wave_vertex_dof[v].is_none() {
                let val = rigid[1][*dd].abs();
                if val > best {
                    best = val;
                    pin_b = Some(*dd);
                }
            }
        }
    }
    let pin_b = pin_b.ok_or_else(|| Error::validation("no plate-only dofs"))?;
    let pin_scale = k.norm_max().max(1.0);
    let k_pin = SparseMatrix::add_scaled(
        &k,
        1.0,
        &SparseMatrix::from_triplets(
            nx,
            nx,
            &[(pin_a, pin_a, pin_scale), (pin_b, pin_b, pin_scale)],
        )?,
        1.0,
    )?;
    let k_pin_lu = LuFactor::new(&k_pin)?;

    // Orthonormal basis of the rigid displacement fields.
    let mut rigid_x_ortho: Vec<Vec<f64>> = Vec::new();
    for r in &rigid {
        let mut w = r[..nx].to_vec();
        for b in &rigid_x_ortho {
            let c: f64 = w.iter().zip(b).map(|(a, q)| a * q).sum();
            for (wi, qi) in w.iter_mut().zip(b) {
                *wi -= c * qi;
            }
        }
        let nrm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-12 {
            for wi in &mut w {
                *wi /= nrm;
            }
            rigid_x_ortho.push(w);
        }
    }

    Ok(GeneratorSystem {
        forms,
        e_mat,
        b_mat,
        m_h,
        rigid,
        mass_lu,
        g1_lu,
        g2v_lu,
        g2n_diag,
        mean_proj_x,
        mean_proj_y,
        k_pin_lu,
        rigid_x_ortho,
    })
}

impl GeneratorSystem {
    pub fn dofmap(&self) -> &DofMap {
        &self.forms.dofmap
    }

    pub fn n_state(&self) -> usize {
        self.forms.dofmap.n_state()
    }

    fn quad_form(&self, mat: &SparseMatrix<f64>, v: &[f64]) -> f64 {
        let mv = mat.matvec(v);
        v.iter().zip(&mv).map(|(a, b)| a * b).sum()
    }

    /// Seven-way energy split; the total is ½ Uᵀ M_H U.
    pub fn energy(&self, u: &[f64]) -> EnergyBreakdown {
        let d = &self.forms.dofmap;
        let x = &u[d.off_x()..d.off_x() + d.n_x];
        let y = &u[d.off_y()..d.off_y() + d.n_x];
        let eta = &u[d.off_eta()..d.off_eta() + d.n_eta];
        let xi = &u[d.off_xi()..d.off_xi() + d.n_xi];
        let zeta = &u[d.off_zeta()..d.off_zeta() + d.n_zeta];
        EnergyBreakdown {
            wave_potential: 0.5 * self.quad_form(&self.forms.k1, x),
            wave_kinetic: 0.5 * self.quad_form(&self.forms.m1, y),
            eta: 0.5 * self.quad_form(&self.forms.g1, eta),
            plate_bending: 0.5 * self.quad_form(&self.forms.k2, x),
            plate_kinetic: 0.5 * self.quad_form(&self.forms.m2, y),
            xi: 0.5 * self.quad_form(&self.forms.g2n, xi),
            zeta: 0.5 * self.quad_form(&self.forms.g2v, zeta),
        }
    }

    /// D(U) = ηᵀG1η + ξᵀG2nξ + ζᵀG2vζ ≥ 0, the exact energy decay rate.
    pub fn dissipation(&self, u: &[f64]) -> DissipationBreakdown {
        let d = &self.forms.dofmap;
        let eta = &u[d.off_eta()..d.off_eta() + d.n_eta];
        let xi = &u[d.off_xi()..d.off_xi() + d.n_xi];
        let zeta = &u[d.off_zeta()..d.off_zeta() + d.n_zeta];
        DissipationBreakdown {
            eta: self.quad_form(&self.forms.g1, eta),
            xi: self.quad_form(&self.forms.g2n, xi),
            zeta: self.quad_form(&self.forms.g2v, zeta),
        }
    }

    /// ⟨u, v⟩_H = uᵀ M_H v.
    pub fn h_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let mv = self.m_h.matvec(v);
        u.iter().zip(&mv).map(|(a, b)| a * b).sum()
    }

    pub fn h_norm(&self, u: &[f64]) -> f64 {
        self.h_inner(u, u).max(0.0).sqrt()
    }

    pub fn h_norm_c(&self, u: &[Complex64]) -> f64 {
        let mv = self.m_h.matvec_c(u);
        u.iter()
            .zip(&mv)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Applies E⁻¹ blockwise (identity / mass solves / boundary masses).
    pub fn apply_e_inv(&self, v: &[f64]) -> Result<Vec<f64>> {
        let d = &self.forms.dofmap;
        let mut out = v.to_vec();
        let y = self.mass_lu.solve(&v[d.off_y()..d.off_y() + d.n_x])?;
        out[d.off_y()..d.off_y() + d.n_x].copy_from_slice(&y);
        if let Some(lu) = &self.g1_lu {
            let s = lu.solve(&v[d.off_eta()..d.off_eta() + d.n_eta])?;
            out[d.off_eta()..d.off_eta() + d.n_eta].copy_from_slice(&s);
        }
        for i in 0..d.n_xi {
            out[d.off_xi() + i] = v[d.off_xi() + i] / self.g2n_diag[i];
        }
        if let Some(lu) = &self.g2v_lu {
            let s = lu.solve(&v[d.off_zeta()..d.off_zeta() + d.n_zeta])?;
            out[d.off_zeta()..d.off_zeta() + d.n_zeta].copy_from_slice(&s);
        }
        Ok(out)
    }

    pub fn apply_e_inv_c(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im: Vec<f64> = v.iter().map(|z| z.im).collect();
        let sre = self.apply_e_inv(&re)?;
        let sim = self.apply_e_inv(&im)?;
        Ok(sre
            .into_iter()
            .zip(sim)
            .map(|(r, i)| Complex64::new(r, i))
            .collect())
    }

    /// A_h U = E⁻¹ B U.
    pub fn apply_generator(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_e_inv(&self.b_mat.matvec(u))
    }

    pub fn apply_generator_c(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_e_inv_c(&self.b_mat.matvec_c(u))
    }

    /// Solves (λ - A_h) X = F. For |λ| below 1e-8 the two rigid modes are
    /// deflated: F is projected onto the complement (in the E-weighted
    /// sense) and the solution is sought E-orthogonal to the rigid basis.
    pub fn resolvent_solve(&self, lambda: Complex64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n_state();
        if f.len() != n {
            return Err(Error::invalid_argument("state length mismatch"));
        }
        if lambda.norm() < 1e-8 {
            return self.resolvent_solve_deflated(lambda, f);
        }
        let rhs = self.e_mat.matvec_c(f);
        if lambda.im == 0.0 {
            let a = SparseMatrix::add_scaled(&self.e_mat, lambda.re, &self.b_mat, -1.0)?;
            let lu = LuFactor::new(&a).map_err(|e| match e {
                Error::Singular { .. } => Error::SpectrumHit {
                    lambda: format!("{lambda}"),
                },
                other => other,
            })?;
            let re: Vec<f64> = rhs.iter().map(|z| z.re).collect();
            let im: Vec<f64> = rhs.iter().map(|z| z.im).collect();
            let xr = lu.solve(&re)?;
            let xi = lu.solve(&im)?;
            return Ok(xr
                .into_iter()
                .zip(xi)
                .map(|(r, i)| Complex64::new(r, i))
                .collect());
        }
        let a = SparseMatrix::add_scaled(
            &self.e_mat.to_complex(),
            lambda,
            &self.b_mat.to_complex(),
            -Complex64::new(1.0, 0.0),
        )?;
        let lu = LuFactor::new(&a).map_err(|e| match e {
            Error::Singular { .. } => Error::SpectrumHit {
                lambda: format!("{lambda}"),
            },
            other => other,
        })?;
        lu.solve(&rhs)
    }

    fn resolvent_solve_deflated(
        &self,
        lambda: Complex64,
        f: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        // Rank-two shift moves the rigid eigenvalue away from zero; the
        // E-orthogonality constraint makes the answer unique and untouched
        // on the complement.
        let n = self.n_state();
        let er: Vec<Vec<f64>> = self.rigid.iter().map(|r| self.e_mat.matvec(r)).collect();
        let mut base = SparseMatrix::add_scaled(
            &self.e_mat.to_complex(),
            lambda,
            &self.b_mat.to_complex(),
            -Complex64::new(1.0, 0.0),
        )?;
        let mut trips: Vec<(usize, usize, Complex64)> = Vec::new();
        for r in 0..n {
            for (c, v) in base.row(r) {
                trips.push((r, c, v));
            }
        }
        let scale = self.e_mat.norm_max();
        for rv in &er {
            for (i, &vi) in rv.iter().enumerate() {
                if vi == 0.0 {
                    continue;
                }
                for (j, &vj) in rv.iter().enumerate() {
                    if vj != 0.0 {
                        trips.push((i, j, Complex64::new(scale * vi * vj, 0.0)));
                    }
                }
            }
        }
        base = SparseMatrix::from_triplets(n, n, &trips)?;
        // Small Gram solves for the projections (the rigid modes are not
        // mutually E-orthogonal).
        let solve2 = |g: [[f64; 2]; 2], b: [Complex64; 2]| -> [Complex64; 2] {
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            [
                (b[0].scale(g[1][1]) - b[1].scale(g[0][1])).scale(1.0 / det),
                (b[1].scale(g[0][0]) - b[0].scale(g[1][0])).scale(1.0 / det),
            ]
        };
        // Project E F off span(E R) (Euclidean least squares).
        let mut rhs = self.e_mat.matvec_c(f);
        let mut gram = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                gram[i][j] = er[i].iter().zip(&er[j]).map(|(a, b)| a * b).sum();
            }
        }
        let mut bvec = [Complex64::zero(); 2];
        for i in 0..2 {
            for (z, &v) in rhs.iter().zip(&er[i]) {
                bvec[i] += z.scale(v);
            }
        }
        let coef = solve2(gram, bvec);
        for i in 0..2 {
            for (z, &v) in rhs.iter_mut().zip(&er[i]) {
                *z -= coef[i].scale(v);
            }
        }
        let lu = LuFactor::new(&base)?;
        let mut x = lu.solve(&rhs)?;
        // Enforce Rᵀ E X = 0: x <- x - R (RᵀER)⁻¹ RᵀE x.
        let mut gram_re = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                gram_re[i][j] = er[i].iter().zip(&self.rigid[j]).map(|(a, b)| a * b).sum();
            }
        }
        let mut bx = [Complex64::zero(); 2];
        for i in 0..2 {
            for (z, &v) in x.iter().zip(&er[i]) {
                bx[i] += z.scale(v);
            }
        }
        let cx = solve2(gram_re, bx);
        for j in 0..2 {
            for (z, &v) in x.iter_mut().zip(&self.rigid[j]) {
                *z -= cx[j].scale(v);
            }
        }
        Ok(x)
    }

    /// Real shifted solve (αE - B) X = E F, for real shifts away from the
    /// spectrum.
    pub fn solve_shifted_real(&self, alpha: f64, f: &[f64]) -> Result<Vec<f64>> {
        let a = SparseMatrix::add_scaled(&self.e_mat, alpha, &self.b_mat, -1.0)?;
        let lu = LuFactor::new(&a)?;
        lu.solve(&self.e_mat.matvec(f))
    }

    /// Zeroes the four mean functionals on both the displacement and the
    /// velocity block, minimally in the (K+M)- resp. M-norm.
    pub fn mean_project(&self, u: &[f64]) -> Result<Vec<f64>> {
        let d = &self.forms.dofmap;
        let nx = d.n_x;
        let mut out = u.to_vec();
        self.mean_proj_x
            .apply(&self.forms.mean_rows, &mut out[d.off_x()..d.off_x() + nx])?;
        self.mean_proj_y
            .apply(&self.forms.mean_rows, &mut out[d.off_y()..d.off_y() + nx])?;
        Ok(out)
    }

    /// Mean functionals (∫u, ∫w, ∫w_x1, ∫w_x2) of the displacement block.
    pub fn mean_values(&self, u: &[f64]) -> [f64; 4] {
        let d = &self.forms.dofmap;
        let x = &u[d.off_x()..d.off_x() + d.n_x];
        let m = self.forms.mean_rows.matvec(x);
        [m[0], m[1], m[2], m[3]]
    }

    /// Energy-seminorm operations for the spectral routines: M_H applied
    /// blockwise with the exact pseudo-inverse (pinned stiffness on the
    /// displacement block, plain mass and boundary-mass solves elsewhere).
    pub fn energy_gram(&self) -> EnergyGram<'_> {
        EnergyGram { sys: self }
    }

    /// Smoothed initial data: U₀ = (I - A_h)⁻¹ P F with P the mean
    /// projection, together with its graph norm ‖U₀‖_{D(A)}.
    pub fn smooth_initial_data(&self, f: &[f64]) -> Result<(Vec<f64>, f64)> {
        let g = self.mean_project(f)?;
        let u0 = self.solve_shifted_real(1.0, &g)?;
        // (I - A) U0 = G, so A U0 = U0 - G without another solve.
        let au0: Vec<f64> = u0.iter().zip(&g).map(|(a, b)| a - b).collect();
        let da = (self.h_inner(&u0, &u0) + self.h_inner(&au0, &au0)).max(0.0);
        Ok((u0, da.sqrt()))
    }
}

/// The energy seminorm as a [`GramSeminorm`]: G = M_H with its
/// two-dimensional rigid kernel, pseudo-inverted block by block.
pub struct EnergyGram<'a> {
    sys: &'a GeneratorSystem,
}

impl<'a> crate::linalg::GramSeminorm for EnergyGram<'a> {
    fn dim(&self) -> usize {
        self.sys.n_state()
    }

    fn apply_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.sys.m_h.matvec_c(x)
    }

    fn pinv_c(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let sys = self.sys;
        let d = &sys.forms.dofmap;
        let nx = d.n_x;
        let mut out = vec![Complex64::zero(); sys.n_state()];

        // Displacement block: K⁺ through the pinned factorization. Project
        // the input onto range(K) first; the pinned solve then returns the
        // particular solution vanishing at the pins, which is mapped back
        // into range(K).
        let mut bx: Vec<Complex64> = b[d.off_x()..d.off_x() + nx].to_vec();
        project_off(&sys.rigid_x_ortho, &mut bx);
        let re: Vec<f64> = bx.iter().map(|z| z.re).collect();
        let im: Vec<f64> = bx.iter().map(|z| z.im).collect();
        let mut xr = sys.k_pin_lu.solve(&re)?;
        let mut xi = sys.k_pin_lu.solve(&im)?;
        let mut xc: Vec<Complex64> = xr
            .drain(..)
            .zip(xi.drain(..))
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
        project_off(&sys.rigid_x_ortho, &mut xc);
        out[d.off_x()..d.off_x() + nx].copy_from_slice(&xc);

        // Velocity and control blocks are definite.
        let solve_real_block =
            |lu: &LuFactor<f64>, part: &[Complex64]| -> Result<Vec<Complex64>> {
                let re: Vec<f64> = part.iter().map(|z| z.re).collect();
                let im: Vec<f64> = part.iter().map(|z| z.im).collect();
                let sr = lu.solve(&re)?;
                let si = lu.solve(&im)?;
                Ok(sr
                    .into_iter()
                    .zip(si)
                    .map(|(r, i)| Complex64::new(r, i))
                    .collect())
            };
        let y = solve_real_block(&sys.mass_lu, &b[d.off_y()..d.off_y() + nx])?;
        out[d.off_y()..d.off_y() + nx].copy_from_slice(&y);
        if let Some(lu) = &sys.g1_lu {
            let s = solve_real_block(lu, &b[d.off_eta()..d.off_eta() + d.n_eta])?;
            out[d.off_eta()..d.off_eta() + d.n_eta].copy_from_slice(&s);
        }
        for i in 0..d.n_xi {
            out[d.off_xi() + i] = b[d.off_xi() + i].scale(1.0 / sys.g2n_diag[i]);
        }
        if let Some(lu) = &sys.g2v_lu {
            let s = solve_real_block(lu, &b[d.off_zeta()..d.off_zeta() + d.n_zeta])?;
            out[d.off_zeta()..d.off_zeta() + d.n_zeta].copy_from_slice(&s);
        }
        Ok(out)
    }

    fn project_c(&self, x: &mut [Complex64]) {
        let d = &self.sys.forms.dofmap;
        project_off(
            &self.sys.rigid_x_ortho,
            &mut x[d.off_x()..d.off_x() + d.n_x],
        );
    }
}

fn project_off(basis: &[Vec<f64>], x: &mut [Complex64]) {
    for q in basis {
        let mut c = Complex64::zero();
        for (xi, &qi) in x.iter().zip(q) {
            c += xi.scale(qi);
        }
        for (xi, &qi) in x.iter_mut().zip(q) {
            *xi -= c.scale(qi);
        }
    }
}
