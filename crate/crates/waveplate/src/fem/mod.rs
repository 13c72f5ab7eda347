//! Form assembly on the tied wave/plate space.
//!
//! The scalar discrete space couples continuous P1 elements on Ω₁ with
//! Morley elements on Ω₂; the transmission condition u = w on the interface
//! is built into the numbering (interface vertex values are one shared
//! dof), so no penalty or multiplier appears anywhere. The controls live in
//! the natural discrete trace spaces: η and ζ piecewise linear on boundary
//! vertices, ξ piecewise constant per Γ₂ edge, collocated with the Morley
//! midpoint normal-derivative dofs.

pub mod manufactured;
pub mod morley;

use crate::error::Result;
use crate::linalg::{SparseMatrix, Triplets};
use crate::mesh::{BoundaryTag, Point2, Subdomain, TriMesh};
use crate::quadrature;
use morley::{global_edge_normal, MorleyElement};
use std::collections::HashMap;

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Block layout of the state (x, y, η, ξ, ζ) where the x block holds the
/// tied scalar field (u on wave dofs, w on plate dofs, shared on the
/// interface) and y its velocity.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_x: usize,
    pub wave_vertex_dof: Vec<Option<usize>>,
    pub plate_vertex_dof: Vec<Option<usize>>,
    pub plate_edge_dof: HashMap<(usize, usize), usize>,
    pub eta_dof: Vec<Option<usize>>,
    pub xi_dof: HashMap<(usize, usize), usize>,
    pub zeta_dof: Vec<Option<usize>>,
    pub n_eta: usize,
    pub n_xi: usize,
    pub n_zeta: usize,
    pub interface_vertices: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.vertices.len();
        let mut in_wave = vec![false; nv];
        let mut in_plate = vec![false; nv];
        for tri in &mesh.triangles {
            for &v in &tri.v {
                match tri.domain {
                    Subdomain::Omega1 => in_wave[v] = true,
                    Subdomain::Omega2 => in_plate[v] = true,
                }
            }
        }
        let mut wave_vertex_dof = vec![None; nv];
        let mut plate_vertex_dof = vec![None; nv];
        let mut next = 0usize;
        for v in 0..nv {
            if in_wave[v] {
                wave_vertex_dof[v] = Some(next);
                if in_plate[v] {
                    plate_vertex_dof[v] = Some(next);
                }
                next += 1;
            }
        }
        for v in 0..nv {
            if in_plate[v] && !in_wave[v] {
                plate_vertex_dof[v] = Some(next);
                next += 1;
            }
        }
        // Plate edge dofs: every edge of an Omega2 triangle.
        let mut plate_edges: Vec<(usize, usize)> = Vec::new();
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        for tri in mesh.triangles.iter().filter(|t| t.domain == Subdomain::Omega2) {
            for k in 0..3 {
                let key = edge_key(tri.v[k], tri.v[(k + 1) % 3]);
                if seen.insert(key, ()).is_none() {
                    plate_edges.push(key);
                }
            }
        }
        plate_edges.sort_unstable();
        let mut plate_edge_dof = HashMap::new();
        for key in plate_edges {
            plate_edge_dof.insert(key, next);
            next += 1;
        }
        let n_x = next;

        // Control dofs.
        let gamma1_vertices = mesh.tagged_vertices(BoundaryTag::Gamma1);
        let mut eta_dof = vec![None; nv];
        for (i, &v) in gamma1_vertices.iter().enumerate() {
            eta_dof[v] = Some(i);
        }
        let gamma2_vertices = mesh.tagged_vertices(BoundaryTag::Gamma2);
        let mut zeta_dof = vec![None; nv];
        for (i, &v) in gamma2_vertices.iter().enumerate() {
            zeta_dof[v] = Some(i);
        }
        let mut xi_dof = HashMap::new();
        let mut gamma2_edges: Vec<(usize, usize)> = mesh
            .edges_with_tag(BoundaryTag::Gamma2)
            .iter()
            .map(|e| edge_key(e.v[0], e.v[1]))
            .collect();
        gamma2_edges.sort_unstable();
        for (i, key) in gamma2_edges.iter().enumerate() {
            xi_dof.insert(*key, i);
        }
        let interface_vertices = mesh.tagged_vertices(BoundaryTag::Interface);

        DofMap {
            n_x,
            wave_vertex_dof,
            plate_vertex_dof,
            plate_edge_dof,
            n_eta: gamma1_vertices.len(),
            n_xi: xi_dof.len(),
            n_zeta: gamma2_vertices.len(),
            eta_dof,
            xi_dof,
            zeta_dof,
            interface_vertices,
        }
    }

    pub fn n_state(&self) -> usize {
        2 * self.n_x + self.n_eta + self.n_xi + self.n_zeta
    }

    pub fn off_x(&self) -> usize {
        0
    }

    pub fn off_y(&self) -> usize {
        self.n_x
    }

    pub fn off_eta(&self) -> usize {
        2 * self.n_x
    }

    pub fn off_xi(&self) -> usize {
        2 * self.n_x + self.n_eta
    }

    pub fn off_zeta(&self) -> usize {
        2 * self.n_x + self.n_eta + self.n_xi
    }

    /// x-dofs carrying the wave field u.
    pub fn wave_dofs(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.wave_vertex_dof.iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }

    /// x-dofs carrying the plate field w (vertex values and edge normals).
    pub fn plate_dofs(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.plate_vertex_dof.iter().flatten().copied().collect();
        out.extend(self.plate_edge_dof.values().copied());
        out.sort_unstable();
        out
    }

    /// Morley dof order of one plate triangle: three vertex values then the
    /// three edge dofs opposite each vertex.
    pub fn morley_globals(&self, tri: [usize; 3]) -> [usize; 6] {
        let mut g = [0usize; 6];
        for k in 0..3 {
            g[k] = self.plate_vertex_dof[tri[k]].expect("plate vertex dof");
        }
        for k in 0..3 {
            let key = edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
            g[3 + k] = self.plate_edge_dof[&key];
        }
        g
    }
}

/// All assembled forms on one mesh.
#[derive(Debug, Clone)]
pub struct FormSet {
    pub dofmap: DofMap,
    pub k1: SparseMatrix<f64>,
    pub m1: SparseMatrix<f64>,
    pub k2: SparseMatrix<f64>,
    pub m2: SparseMatrix<f64>,
    pub g1: SparseMatrix<f64>,
    pub g2v: SparseMatrix<f64>,
    pub g2n: SparseMatrix<f64>,
    pub t1: SparseMatrix<f64>,
    pub t2v: SparseMatrix<f64>,
    pub t2n: SparseMatrix<f64>,
    /// Rows: ∫u over Ω₁, ∫w over Ω₂, ∫w_x1, ∫w_x2 (all on the x block).
    pub mean_rows: SparseMatrix<f64>,
    pub mu: f64,
}

pub fn assemble_forms(mesh: &TriMesh, mu: f64) -> Result<FormSet> {
    let dofmap = DofMap::new(mesh);
    let (k1, m1) = assemble_wave_forms(mesh, &dofmap)?;
    let (k2, m2) = assemble_plate_forms(mesh, &dofmap, mu)?;
    let (g1, g2v, g2n) = assemble_boundary_masses(mesh, &dofmap)?;
    let (t1, t2v, t2n) = assemble_traces(mesh, &dofmap)?;
    let mean_rows = assemble_mean_rows(mesh, &dofmap)?;
    Ok(FormSet {
        dofmap,
        k1,
        m1,
        k2,
        m2,
        g1,
        g2v,
        g2n,
        t1,
        t2v,
        t2n,
        mean_rows,
        mu,
    })
}

/// P1 gradients of one triangle (constant), with its area.
pub(crate) fn p1_gradients(pts: [Point2; 3]) -> ([[f64; 2]; 3], f64) {
    let area = 0.5
        * ((pts[1].x - pts[0].x) * (pts[2].y - pts[0].y)
            - (pts[2].x - pts[0].x) * (pts[1].y - pts[0].y));
    let mut grads = [[0.0; 2]; 3];
    for k in 0..3 {
        let a = pts[(k + 1) % 3];
        let b = pts[(k + 2) % 3];
        grads[k] = [(a.y - b.y) / (2.0 * area), (b.x - a.x) / (2.0 * area)];
    }
    (grads, area)
}

/// Wave stiffness and mass: element-exact P1 integration on Ω₁.
pub fn assemble_wave_forms(
    mesh: &TriMesh,
    dofmap: &DofMap,
) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>)> {
    let n = dofmap.n_x;
    let mut k = Triplets::new();
    let mut m = Triplets::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.domain != Subdomain::Omega1 {
            continue;
        }
        let pts = mesh.tri_points(t);
        let (grads, area) = p1_gradients(pts);
        let g: Vec<usize> = tri
            .v
            .iter()
            .map(|&v| dofmap.wave_vertex_dof[v].expect("wave vertex dof"))
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let kij = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                k.push(g[i], g[j], kij);
                let mij = if i == j { area / 6.0 } else { area / 12.0 };
                m.push(g[i], g[j], mij);
            }
        }
    }
    Ok((k.build(n, n)?, m.build(n, n)?))
}

fn thread_count() -> usize {
    std::env::var("WAVEPLATE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Plate bending form a(·,·) and plate mass, Morley elements on Ω₂.
pub fn assemble_plate_forms(
    mesh: &TriMesh,
    dofmap: &DofMap,
    mu: f64,
) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>)> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(crate::error::Error::invalid_argument(format!(
            "Poisson coefficient must lie in (0, 1/2), got {mu}"
        )));
    }
    let n = dofmap.n_x;
    let plate_tris: Vec<usize> = (0..mesh.triangles.len())
        .filter(|&t| mesh.triangles[t].domain == Subdomain::Omega2)
        .collect();
    let rule = quadrature::tri_rule(4);

    let assemble_chunk = |chunk: &[usize]| -> (Triplets, Triplets) {
        let mut k = Triplets::new();
        let mut m = Triplets::new();
        for &t in chunk {
            let tri = mesh.triangles[t];
            let pts = mesh.tri_points(t);
            let mut normals = [[0.0; 2]; 3];
            for e in 0..3 {
                let (a, b) = (tri.v[(e + 1) % 3], tri.v[(e + 2) % 3]);
                let key = edge_key(a, b);
                normals[e] = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            }
            let el = MorleyElement::new(pts, normals);
            let area = mesh.signed_area(t);
            let g = dofmap.morley_globals(tri.v);
            for i in 0..6 {
                let [ixx, iyy, ixy] = el.curvature[i];
                for j in 0..6 {
                    let [jxx, jyy, jxy] = el.curvature[j];
                    let kij = area
                        * (ixx * jxx
                            + iyy * jyy
                            + mu * (ixx * jyy + iyy * jxx)
                            + 2.0 * (1.0 - mu) * ixy * jxy);
                    k.push(g[i], g[j], kij);
                }
            }
            for node in &rule {
                let p = Point2::new(
                    node.bary[0] * pts[0].x + node.bary[1] * pts[1].x + node.bary[2] * pts[2].x,
                    node.bary[0] * pts[0].y + node.bary[1] * pts[1].y + node.bary[2] * pts[2].y,
                );
                let mut vals = [0.0; 6];
                for j in 0..6 {
                    vals[j] = el.eval(j, p);
                }
                let w = node.weight * area;
                for i in 0..6 {
                    for j in 0..6 {
                        m.push(g[i], g[j], w * vals[i] * vals[j]);
                    }
                }
            }
        }
        (k, m)
    };

    let threads = thread_count().min(plate_tris.len().max(1));
    let (mut k_all, mut m_all) = (Triplets::new(), Triplets::new());
    if threads <= 1 {
        let (k, m) = assemble_chunk(&plate_tris);
        k_all.extend(k);
        m_all.extend(m);
    } else {
        let chunk_size = plate_tris.len().div_ceil(threads);
        let results: Vec<(Triplets, Triplets)> = std::thread::scope(|scope| {
            let handles: Vec<_> = plate_tris
                .chunks(chunk_size)
                .map(|chunk| scope.spawn(|| assemble_chunk(chunk)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (k, m) in results {
            k_all.extend(k);
            m_all.extend(m);
        }
    }
    Ok((k_all.build(n, n)?, m_all.build(n, n)?))
}

/// Boundary mass matrices: P1 mass on Γ₁ (η), P1 mass on Γ₂ (ζ) and the
/// lumped per-edge mass on Γ₂ (ξ, diagonal with edge lengths).
pub fn assemble_boundary_masses(
    mesh: &TriMesh,
    dofmap: &DofMap,
) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>, SparseMatrix<f64>)> {
    let mut g1 = Triplets::new();
    let mut g2v = Triplets::new();
    let mut g2n = Triplets::new();
    for e in &mesh.tagged_edges {
        let len = mesh.edge_length(e);
        match e.tag {
            BoundaryTag::Gamma1 => {
                let d = [
                    dofmap.eta_dof[e.v[0]].expect("eta dof"),
                    dofmap.eta_dof[e.v[1]].expect("eta dof"),
                ];
                for i in 0..2 {
                    for j in 0..2 {
                        let v = if i == j { len / 3.0 } else { len / 6.0 };
                        g1.push(d[i], d[j], v);
                    }
                }
            }
            BoundaryTag::Gamma2 => {
                let d = [
                    dofmap.zeta_dof[e.v[0]].expect("zeta dof"),
                    dofmap.zeta_dof[e.v[1]].expect("zeta dof"),
                ];
                for i in 0..2 {
                    for j in 0..2 {
                        let v = if i == j { len / 3.0 } else { len / 6.0 };
                        g2v.push(d[i], d[j], v);
                    }
                }
                let key = edge_key(e.v[0], e.v[1]);
                g2n.push(dofmap.xi_dof[&key], dofmap.xi_dof[&key], len);
            }
            BoundaryTag::Interface => {}
        }
    }
    Ok((
        g1.build(dofmap.n_eta, dofmap.n_eta)?,
        g2v.build(dofmap.n_zeta, dofmap.n_zeta)?,
        g2n.build(dofmap.n_xi, dofmap.n_xi)?,
    ))
}

/// Trace couplings: T1 restricts wave vertex values to Γ₁, T2v restricts
/// plate vertex values to Γ₂, T2n extracts the Γ₂ edge-midpoint normal
/// derivatives with the outward sign convention.
pub fn assemble_traces(
    mesh: &TriMesh,
    dofmap: &DofMap,
) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>, SparseMatrix<f64>)> {
    let mut t1 = Triplets::new();
    let mut t2v = Triplets::new();
    let mut t2n = Triplets::new();
    let incidence = mesh.edge_incidence();
    for v in 0..mesh.vertices.len() {
        if let Some(e) = dofmap.eta_dof[v] {
            t1.push(e, dofmap.wave_vertex_dof[v].expect("gamma1 vertex in wave"), 1.0);
        }
        if let Some(z) = dofmap.zeta_dof[v] {
            t2v.push(z, dofmap.plate_vertex_dof[v].expect("gamma2 vertex in plate"), 1.0);
        }
    }
    for e in mesh.edges_with_tag(BoundaryTag::Gamma2) {
        let key = edge_key(e.v[0], e.v[1]);
        let owner = incidence[&key].omega2[0];
        let nu2 = mesh.outward_normal_from_triangle(e, owner);
        let ng = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
        let sign = if ng[0] * nu2[0] + ng[1] * nu2[1] >= 0.0 {
            1.0
        } else {
            -1.0
        };
        t2n.push(dofmap.xi_dof[&key], dofmap.plate_edge_dof[&key], sign);
    }
    Ok((
        t1.build(dofmap.n_eta, dofmap.n_x)?,
        t2v.build(dofmap.n_zeta, dofmap.n_x)?,
        t2n.build(dofmap.n_xi, dofmap.n_x)?,
    ))
}

/// Mean functionals as four rows over the x block: ∫_{Ω₁} u, ∫_{Ω₂} w,
/// ∫_{Ω₂} w_x1, ∫_{Ω₂} w_x2.
pub fn assemble_mean_rows(mesh: &TriMesh, dofmap: &DofMap) -> Result<SparseMatrix<f64>> {
    let mut rows = Triplets::new();
    let rule = quadrature::tri_rule(2);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.tri_points(t);
        let area = mesh.signed_area(t);
        match tri.domain {
            Subdomain::Omega1 => {
                for &v in &tri.v {
                    rows.push(0, dofmap.wave_vertex_dof[v].expect("wave dof"), area / 3.0);
                }
            }
            Subdomain::Omega2 => {
                let mut normals = [[0.0; 2]; 3];
                for e in 0..3 {
                    let key = edge_key(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3]);
                    normals[e] = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
                }
                let el = MorleyElement::new(pts, normals);
                let g = dofmap.morley_globals(tri.v);
                for node in &rule {
                    let p = Point2::new(
                        node.bary[0] * pts[0].x + node.bary[1] * pts[1].x + node.bary[2] * pts[2].x,
                        node.bary[0] * pts[0].y + node.bary[1] * pts[1].y + node.bary[2] * pts[2].y,
                    );
                    let w = node.weight * area;
                    for j in 0..6 {
                        rows.push(1, g[j], w * el.eval(j, p));
                        let grad = el.grad(j, p);
                        rows.push(2, g[j], w * grad[0]);
                        rows.push(3, g[j], w * grad[1]);
                    }
                }
            }
        }
    }
    rows.build(4, dofmap.n_x)
}

/// Block-diagonal energy Gram on the full state: K on the x block, M on the
/// y block and the control masses on their blocks. The total energy is
/// E(U) = ½ Uᵀ M_H U.
pub fn assemble_h_gram(forms: &FormSet) -> Result<SparseMatrix<f64>> {
    let d = &forms.dofmap;
    let n = d.n_state();
    let mut trips = Triplets::new();
    let place = |mat: &SparseMatrix<f64>, off_r: usize, off_c: usize, trips: &mut Triplets| {
        for r in 0..mat.nrows() {
            for (c, v) in mat.row(r) {
                trips.push(off_r + r, off_c + c, v);
            }
        }
    };
    place(&forms.k1, d.off_x(), d.off_x(), &mut trips);
    place(&forms.k2, d.off_x(), d.off_x(), &mut trips);
    place(&forms.m1, d.off_y(), d.off_y(), &mut trips);
    place(&forms.m2, d.off_y(), d.off_y(), &mut trips);
    place(&forms.g1, d.off_eta(), d.off_eta(), &mut trips);
    place(&forms.g2n, d.off_xi(), d.off_xi(), &mut trips);
    place(&forms.g2v, d.off_zeta(), d.off_zeta(), &mut trips);
    trips.build(n, n)
}

/// The two-dimensional rigid basis of the energy seminorm: a shared
/// constant, and the affine plate field vanishing on the interface line
/// (paired with u = 0).
pub fn rigid_basis(mesh: &TriMesh, dofmap: &DofMap) -> Vec<Vec<f64>> {
    let n = dofmap.n_state();
    let mut r1 = vec![0.0; n];
    for d in dofmap.wave_dofs() {
        r1[d] = 1.0;
    }
    for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
        let _ = v;
        if let Some(d) = dof {
            r1[*d] = 1.0;
        }
    }
    // Edge normal-derivative dofs of a constant are zero.

    // Linear function vanishing on the interface line.
    let interface_edges = mesh.edges_with_tag(BoundaryTag::Interface);
    let mut r2 = vec![0.0; n];
    if let Some(e0) = interface_edges.first() {
        let p0 = mesh.vertices[e0.v[0]];
        let p1 = mesh.vertices[e0.v[1]];
        let len = p0.dist(&p1);
        let dir = [(p1.x - p0.x) / len, (p1.y - p0.y) / len];
        let normal = [dir[1], -dir[0]];
        let ell = |p: Point2| (p.x - p0.x) * normal[0] + (p.y - p0.y) * normal[1];
        for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
            if let Some(d) = dof {
                if dofmap.wave_vertex_dof[v].is_none() {
                    r2[*d] = ell(mesh.vertices[v]);
                }
                // Shared interface vertices sit on the line: ell = 0 there,
                // matching u = 0 on the wave side.
            }
        }
        for (key, d) in &dofmap.plate_edge_dof {
            let ng = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            r2[*d] = ng[0] * normal[0] + ng[1] * normal[1];
        }
    }
    vec![r1, r2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen_rect_transmission;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reference_triangle_stiffness() {
        // Single wave triangle (0,0), (1,0), (0,1).
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let (grads, area) = p1_gradients(pts);
        let expect = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let kij = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                assert!((kij - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn wave_forms_basics() {
        let mesh = gen_rect_transmission(4).unwrap();
        let dofmap = DofMap::new(&mesh);
        let (k1, m1) = assemble_wave_forms(&mesh, &dofmap).unwrap();
        // Constants in the kernel of K1.
        let mut ones = vec![0.0; dofmap.n_x];
        for d in dofmap.wave_dofs() {
            ones[d] = 1.0;
        }
        let k_ones = k1.matvec(&ones);
        let worst = k_ones.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(worst < 1e-13, "K1 * 1 = {worst}");
        // Mass sums to the wave area.
        let m_ones = m1.matvec(&ones);
        let total: f64 = ones.iter().zip(&m_ones).map(|(a, b)| a * b).sum();
        assert!((total - 1.0).abs() < 1e-12, "area {total}");
        assert!(k1.asymmetry() < 1e-12 * k1.norm_max());
        assert!(m1.asymmetry() < 1e-14);
    }

    #[test]
    fn plate_form_kernel_and_quadratic_energy() {
        let mesh = gen_rect_transmission(3).unwrap();
        let dofmap = DofMap::new(&mesh);
        let (k2, m2) = assemble_plate_forms(&mesh, &dofmap, 0.3).unwrap();
        assert!(k2.asymmetry() < 1e-12 * k2.norm_max());
        assert!(m2.asymmetry() < 1e-14);

        // Affine interpolant: zero bending energy.
        let mut w = vec![0.0; dofmap.n_x];
        let f = |p: Point2| 1.0 + 0.3 * p.x - 0.8 * p.y;
        for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
            if let Some(d) = dof {
                w[*d] = f(mesh.vertices[v]);
            }
        }
        for (key, d) in &dofmap.plate_edge_dof {
            let ng = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            w[*d] = 0.3 * ng[0] - 0.8 * ng[1];
        }
        let kw = k2.matvec(&w);
        let e: f64 = w.iter().zip(&kw).map(|(a, b)| a * b).sum();
        assert!(e.abs() < 1e-12, "affine energy {e}");

        // w = x^2 has a(w, w) = 4 * area.
        let mut q = vec![0.0; dofmap.n_x];
        for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
            if let Some(d) = dof {
                q[*d] = mesh.vertices[v].x * mesh.vertices[v].x;
            }
        }
        for (key, d) in &dofmap.plate_edge_dof {
            let ng = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            let mid = Point2::new(
                0.5 * (mesh.vertices[key.0].x + mesh.vertices[key.1].x),
                0.5 * (mesh.vertices[key.0].y + mesh.vertices[key.1].y),
            );
            q[*d] = 2.0 * mid.x * ng[0];
        }
        let kq = k2.matvec(&q);
        let eq: f64 = q.iter().zip(&kq).map(|(a, b)| a * b).sum();
        assert!((eq - 4.0).abs() < 1e-10, "quadratic energy {eq}");

        // PSD on random fields.
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let x: Vec<f64> = (0..dofmap.n_x).map(|_| rng.gen::<f64>() - 0.5).collect();
            let kx = k2.matvec(&x);
            let e: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
            assert!(e >= -1e-12, "negative bending energy {e}");
        }
        let _ = m2;
    }

    #[test]
    fn boundary_masses_and_traces() {
        let mesh = gen_rect_transmission(4).unwrap();
        let dofmap = DofMap::new(&mesh);
        let (g1, g2v, g2n) = assemble_boundary_masses(&mesh, &dofmap).unwrap();
        let ones1 = vec![1.0; dofmap.n_eta];
        let total: f64 = g1.matvec(&ones1).iter().sum();
        assert!((total - 3.0).abs() < 1e-12, "Gamma1 length {total}");
        let ones2 = vec![1.0; dofmap.n_zeta];
        let total2: f64 = g2v.matvec(&ones2).iter().sum();
        assert!((total2 - 3.0).abs() < 1e-12);
        // Diagonal lumped mass carries edge lengths.
        for e in mesh.edges_with_tag(BoundaryTag::Gamma2) {
            let key = edge_key(e.v[0], e.v[1]);
            let d = dofmap.xi_dof[&key];
            assert!((g2n.get(d, d) - mesh.edge_length(e)).abs() < 1e-15);
        }

        let (t1, t2v, t2n) = assemble_traces(&mesh, &dofmap).unwrap();
        // Constant field restricts to all-ones on Gamma1.
        let mut ones_x = vec![0.0; dofmap.n_x];
        for d in dofmap.wave_dofs() {
            ones_x[d] = 1.0;
        }
        let tr = t1.matvec(&ones_x);
        for v in tr {
            assert!((v - 1.0).abs() < 1e-15);
        }
        let _ = t2v;

        // w = x: outward normal derivative is +1 on the right wall, 0 on
        // horizontal walls.
        let mut wx = vec![0.0; dofmap.n_x];
        for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
            if let Some(d) = dof {
                wx[*d] = mesh.vertices[v].x;
            }
        }
        for (key, d) in &dofmap.plate_edge_dof {
            let ng = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            wx[*d] = ng[0];
        }
        let tn = t2n.matvec(&wx);
        for e in mesh.edges_with_tag(BoundaryTag::Gamma2) {
            let key = edge_key(e.v[0], e.v[1]);
            let val = tn[dofmap.xi_dof[&key]];
            let mid = mesh.edge_midpoint(e);
            if (mid.x - 1.0).abs() < 1e-12 {
                assert!((val - 1.0).abs() < 1e-12, "right wall {val}");
            } else {
                assert!(val.abs() < 1e-12, "horizontal wall {val}");
            }
        }
    }

    #[test]
    fn interface_vertices_share_dofs() {
        let mesh = gen_rect_transmission(3).unwrap();
        let dofmap = DofMap::new(&mesh);
        for &v in &dofmap.interface_vertices {
            let wd = dofmap.wave_vertex_dof[v].unwrap();
            let pd = dofmap.plate_vertex_dof[v].unwrap();
            assert_eq!(wd, pd);
        }
    }

    #[test]
    fn h_gram_block_values_and_kernel() {
        let mesh = gen_rect_transmission(2).unwrap();
        let forms = assemble_forms(&mesh, 0.3).unwrap();
        let mh = assemble_h_gram(&forms).unwrap();
        assert!(mh.asymmetry() < 1e-12 * mh.norm_max());

        // eta-only state has energy length(Gamma1)/2.
        let d = &forms.dofmap;
        let mut u = vec![0.0; d.n_state()];
        for i in 0..d.n_eta {
            u[d.off_eta() + i] = 1.0;
        }
        let mu = mh.matvec(&u);
        let e: f64 = 0.5 * u.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>();
        assert!((e - 1.5).abs() < 1e-12, "eta energy {e}");

        // Rigid basis spans the kernel.
        let rigid = rigid_basis(&mesh, d);
        for r in &rigid {
            let mr = mh.matvec(r);
            let worst = mr.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(worst < 1e-12 * mh.norm_max(), "kernel residual {worst}");
        }
        // Kernel dimension is exactly two: M_H annihilates the rigid pair
        // (above) and the bordered matrix [[M_H, R],[Rᵀ, 0]] is
        // nonsingular, which forces ker(M_H) ⊆ span(R).
        let n = d.n_state();
        let mut rn: Vec<Vec<f64>> = rigid.clone();
        // Euclidean orthonormalization of the border columns.
        for i in 0..rn.len() {
            for j in 0..i {
                let c: f64 = rn[i].iter().zip(&rn[j]).map(|(a, b)| a * b).sum();
                let rj = rn[j].clone();
                for (x, y) in rn[i].iter_mut().zip(&rj) {
                    *x -= c * y;
                }
            }
            let nrm: f64 = rn[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in rn[i].iter_mut() {
                *x /= nrm;
            }
        }
        let mut trips = crate::linalg::Triplets::new();
        for r in 0..n {
            for (c, v) in mh.row(r) {
                trips.push(r, c, v);
            }
        }
        for (j, col) in rn.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    trips.push(i, n + j, v);
                    trips.push(n + j, i, v);
                }
            }
        }
        let bordered = trips.build(n + 2, n + 2).unwrap();
        assert!(crate::linalg::LuFactor::new(&bordered).is_ok());
    }

    #[test]
    fn mean_rows_integrate_exactly() {
        let mesh = gen_rect_transmission(3).unwrap();
        let dofmap = DofMap::new(&mesh);
        let rows = assemble_mean_rows(&mesh, &dofmap).unwrap();
        // u = 1 on the wave: integral = |Omega1| = 1.
        let mut x = vec![0.0; dofmap.n_x];
        for d in dofmap.wave_dofs() {
            x[d] = 1.0;
        }
        let m = rows.matvec(&x);
        assert!((m[0] - 1.0).abs() < 1e-12);
        // w = x on the plate: ∫w = 1/2, ∫w_x1 = 1, ∫w_x2 = 0.
        let mut xw = vec![0.0; dofmap.n_x];
        for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
            if let Some(d) = dof {
                xw[*d] = mesh.vertices[v].x;
            }
        }
        for (key, d) in &dofmap.plate_edge_dof {
            let ng = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            xw[*d] = ng[0];
        }
        let mw = rows.matvec(&xw);
        assert!((mw[1] - 0.5).abs() < 1e-12, "mean w {}", mw[1]);
        assert!((mw[2] - 1.0).abs() < 1e-12, "mean w_x1 {}", mw[2]);
        assert!(mw[3].abs() < 1e-12, "mean w_x2 {}", mw[3]);
    }
}
