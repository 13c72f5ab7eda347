//! Manufactured-solution convergence studies for the two discretizations:
//! a pure-Neumann Poisson problem on the wave side and a clamped
//! biharmonic problem on the plate side.

use super::{morley::global_edge_normal, morley::MorleyElement, p1_gradients, DofMap};
use super::{assemble_plate_forms, assemble_wave_forms};
use crate::error::Result;
use crate::linalg::{LuFactor, SparseMatrix, Triplets};
use crate::mesh::{gen_rect_transmission, refine_uniform, Point2, Subdomain};
use crate::quadrature;
use std::collections::HashMap;

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Extracts the square submatrix on `dofs` (sorted), remapping indices.
fn restrict(mat: &SparseMatrix<f64>, dofs: &[usize]) -> Result<SparseMatrix<f64>> {
    let mut map = HashMap::new();
    for (i, &d) in dofs.iter().enumerate() {
        map.insert(d, i);
    }
    let mut trips = Vec::new();
    for (i, &d) in dofs.iter().enumerate() {
        for (c, v) in mat.row(d) {
            if let Some(&j) = map.get(&c) {
                trips.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triplets(dofs.len(), dofs.len(), &trips)
}

/// L2 and H1-seminorm errors of the P1 solution of the manufactured
/// Neumann-Poisson problem on Ω₁, one pair per refinement level.
pub fn poisson_errors(base_n: usize, levels: usize) -> Result<Vec<(f64, f64)>> {
    // Exact solution with zero Neumann data on [-1,0]x[0,1].
    let p = |x: f64| x * x * (x + 1.0) * (x + 1.0);
    let dp = |x: f64| 2.0 * x * (x + 1.0) * (2.0 * x + 1.0);
    let ddp = |x: f64| 12.0 * x * x + 12.0 * x + 2.0;
    let q = |y: f64| y * y * (1.0 - y) * (1.0 - y);
    let dq = |y: f64| 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
    let ddq = |y: f64| 12.0 * y * y - 12.0 * y + 2.0;
    let exact = move |pt: Point2| p(pt.x) * q(pt.y);
    let grad_exact = move |pt: Point2| [dp(pt.x) * q(pt.y), p(pt.x) * dq(pt.y)];
    let load = move |pt: Point2| -(ddp(pt.x) * q(pt.y) + p(pt.x) * ddq(pt.y));

    let mut mesh = gen_rect_transmission(base_n)?;
    let mut out = Vec::new();
    for _level in 0..levels {
        let dofmap = DofMap::new(&mesh);
        let (k1, _m1) = assemble_wave_forms(&mesh, &dofmap)?;
        let wave = dofmap.wave_dofs();
        let k = restrict(&k1, &wave)?;
        let mut local_of = HashMap::new();
        for (i, &d) in wave.iter().enumerate() {
            local_of.insert(d, i);
        }

        // Load vector and mean row by quadrature exact for the data.
        let nw = wave.len();
        let rule = quadrature::tri_rule(9);
        let mut rhs = vec![0.0; nw];
        let mut mean = vec![0.0; nw];
        let mut mean_exact = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.domain != Subdomain::Omega1 {
                continue;
            }
            let pts = mesh.tri_points(t);
            let area = mesh.signed_area(t);
            let locals: Vec<usize> = tri
                .v
                .iter()
                .map(|&v| local_of[&dofmap.wave_vertex_dof[v].unwrap()])
                .collect();
            for node in &rule {
                let pt = Point2::new(
                    node.bary[0] * pts[0].x + node.bary[1] * pts[1].x + node.bary[2] * pts[2].x,
                    node.bary[0] * pts[0].y + node.bary[1] * pts[1].y + node.bary[2] * pts[2].y,
                );
                let w = node.weight * area;
                for k3 in 0..3 {
                    rhs[locals[k3]] += w * load(pt) * node.bary[k3];
                    mean[locals[k3]] += w * node.bary[k3];
                }
                mean_exact += w * exact(pt);
            }
        }

        // Saddle system pins the mean to the exact value.
        let mut trips = Triplets::new();
        for r in 0..nw {
            for (c, v) in k.row(r) {
                trips.push(r, c, v);
            }
        }
        for (i, &m) in mean.iter().enumerate() {
            trips.push(i, nw, m);
            trips.push(nw, i, m);
        }
        let sys = trips.build(nw + 1, nw + 1)?;
        let mut b = rhs.clone();
        b.push(mean_exact);
        let sol = LuFactor::new(&sys)?.solve(&b)?;

        // Errors by quadrature.
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.domain != Subdomain::Omega1 {
                continue;
            }
            let pts = mesh.tri_points(t);
            let area = mesh.signed_area(t);
            let (grads, _) = p1_gradients(pts);
            let locals: Vec<usize> = tri
                .v
                .iter()
                .map(|&v| local_of[&dofmap.wave_vertex_dof[v].unwrap()])
                .collect();
            let mut gh = [0.0, 0.0];
            for k3 in 0..3 {
                gh[0] += sol[locals[k3]] * grads[k3][0];
                gh[1] += sol[locals[k3]] * grads[k3][1];
            }
            for node in &rule {
                let pt = Point2::new(
                    node.bary[0] * pts[0].x + node.bary[1] * pts[1].x + node.bary[2] * pts[2].x,
                    node.bary[0] * pts[0].y + node.bary[1] * pts[1].y + node.bary[2] * pts[2].y,
                );
                let w = node.weight * area;
                let uh: f64 = (0..3).map(|k3| sol[locals[k3]] * node.bary[k3]).sum();
                let du = uh - exact(pt);
                l2 += w * du * du;
                let ge = grad_exact(pt);
                h1 += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
            }
        }
        out.push((l2.sqrt(), h1.sqrt()));
        mesh = refine_uniform(&mesh)?;
    }
    Ok(out)
}

/// L2 and broken-energy errors of the Morley solution of the clamped
/// biharmonic problem on Ω₂, one pair per refinement level.
pub fn biharmonic_errors(base_n: usize, levels: usize, mu: f64) -> Result<Vec<(f64, f64)>> {
    // w* = x^2 (1-x)^2 y^2 (1-y)^2 on [0,1]^2, clamped on the whole boundary.
    let g = |x: f64| x * x * (1.0 - x) * (1.0 - x);
    let dg = |x: f64| 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    let ddg = |x: f64| 2.0 - 12.0 * x + 12.0 * x * x;
    let d4g = 24.0;
    let exact = move |p: Point2| g(p.x) * g(p.y);
    let grad_exact = move |p: Point2| [dg(p.x) * g(p.y), g(p.x) * dg(p.y)];
    let hess_exact = move |p: Point2| {
        [
            ddg(p.x) * g(p.y),          // w_xx
            g(p.x) * ddg(p.y),          // w_yy
            dg(p.x) * dg(p.y),          // w_xy
        ]
    };
    let load = move |p: Point2| d4g * g(p.y) + 2.0 * ddg(p.x) * ddg(p.y) + g(p.x) * d4g;

    let mut mesh = gen_rect_transmission(base_n)?;
    let mut out = Vec::new();
    for _level in 0..levels {
        let dofmap = DofMap::new(&mesh);
        let (k2, _m2) = assemble_plate_forms(&mesh, &dofmap, mu)?;

        // Interior dofs: drop vertex values and edge dofs on the plate
        // boundary (Gamma2 and the interface).
        let incidence = mesh.edge_incidence();
        let mut boundary_vertex = vec![false; mesh.vertices.len()];
        let mut boundary_edge: HashMap<(usize, usize), bool> = HashMap::new();
        for (key, inc) in &incidence {
            let on_plate_boundary =
                inc.omega2.len() == 1 && (inc.omega1.len() == 1 || inc.omega1.is_empty());
            if inc.omega2.len() == 1 && on_plate_boundary {
                boundary_vertex[key.0] = true;
                boundary_vertex[key.1] = true;
                boundary_edge.insert(*key, true);
            }
        }
        let mut interior = Vec::new();
        for (v, dof) in dofmap.plate_vertex_dof.iter().enumerate() {
            if let Some(d) = dof {
                if !boundary_vertex[v] {
                    interior.push(*d);
                }
            }
        }
        let mut edge_dofs: Vec<((usize, usize), usize)> =
            dofmap.plate_edge_dof.iter().map(|(k, v)| (*k, *v)).collect();
        edge_dofs.sort_by_key(|&(_, d)| d);
        for (key, d) in edge_dofs {
            if !boundary_edge.contains_key(&key) {
                interior.push(d);
            }
        }
        interior.sort_unstable();
        let k = restrict(&k2, &interior)?;
        let mut local_of = HashMap::new();
        for (i, &d) in interior.iter().enumerate() {
            local_of.insert(d, i);
        }

        // Load vector.
        let rule = quadrature::tri_rule(9);
        let mut rhs = vec![0.0; interior.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.domain != Subdomain::Omega2 {
                continue;
            }
            let pts = mesh.tri_points(t);
            let area = mesh.signed_area(t);
            let mut normals = [[0.0; 2]; 3];
            for e in 0..3 {
                let key = edge_key(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3]);
                normals[e] = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            }
            let el = MorleyElement::new(pts, normals);
            let globals = dofmap.morley_globals(tri.v);
            for node in &rule {
                let pt = Point2::new(
                    node.bary[0] * pts[0].x + node.bary[1] * pts[1].x + node.bary[2] * pts[2].x,
                    node.bary[0] * pts[0].y + node.bary[1] * pts[1].y + node.bary[2] * pts[2].y,
                );
                let w = node.weight * area * load(pt);
                for j in 0..6 {
                    if let Some(&loc) = local_of.get(&globals[j]) {
                        rhs[loc] += w * el.eval(j, pt);
                    }
                }
            }
        }
        let sol = LuFactor::new(&k)?.solve(&rhs)?;

        // Errors.
        let mut l2 = 0.0;
        let mut energy = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if tri.domain != Subdomain::Omega2 {
                continue;
            }
            let pts = mesh.tri_points(t);
            let area = mesh.signed_area(t);
            let mut normals = [[0.0; 2]; 3];
            for e in 0..3 {
                let key = edge_key(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3]);
                normals[e] = global_edge_normal(mesh.vertices[key.0], mesh.vertices[key.1]);
            }
            let el = MorleyElement::new(pts, normals);
            let globals = dofmap.morley_globals(tri.v);
            let coeff: Vec<f64> = globals
                .iter()
                .map(|g2| local_of.get(g2).map_or(0.0, |&loc| sol[loc]))
                .collect();
            let mut hess_h = [0.0; 3];
            for j in 0..6 {
                hess_h[0] += coeff[j] * el.curvature[j][0];
                hess_h[1] += coeff[j] * el.curvature[j][1];
                hess_h[2] += coeff[j] * el.curvature[j][2];
            }
            for node in &rule {
                let pt = Point2::new(
                    node.bary[0] * pts[0].x + node.bary[1] * pts[1].x + node.bary[2] * pts[2].x,
                    node.bary[0] * pts[0].y + node.bary[1] * pts[1].y + node.bary[2] * pts[2].y,
                );
                let w = node.weight * area;
                let wh: f64 = (0..6).map(|j| coeff[j] * el.eval(j, pt)).sum();
                let dv = wh - exact(pt);
                l2 += w * dv * dv;
                let he = hess_exact(pt);
                let e11 = hess_h[0] - he[0];
                let e22 = hess_h[1] - he[1];
                let e12 = hess_h[2] - he[2];
                energy += w
                    * (e11 * e11
                        + e22 * e22
                        + 2.0 * mu * e11 * e22
                        + 2.0 * (1.0 - mu) * e12 * e12);
            }
        }
        let _ = grad_exact;
        out.push((l2.sqrt(), energy.max(0.0).sqrt()));
        mesh = refine_uniform(&mesh)?;
    }
    Ok(out)
}

/// Rates between successive levels: log2(e_coarse / e_fine).
pub fn rates(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_converges_at_order_two() {
        let errs = poisson_errors(4, 4).unwrap();
        let l2: Vec<f64> = errs.iter().map(|e| e.0).collect();
        let h1: Vec<f64> = errs.iter().map(|e| e.1).collect();
        let rl2 = rates(&l2);
        let rh1 = rates(&h1);
        assert!(
            rl2.last().unwrap() >= &1.9,
            "L2 rates {rl2:?} (errors {l2:?})"
        );
        assert!(rh1.last().unwrap() >= &0.9, "H1 rates {rh1:?}");
    }

    #[test]
    fn biharmonic_converges_at_morley_orders() {
        let errs = biharmonic_errors(4, 4, 0.3).unwrap();
        let l2: Vec<f64> = errs.iter().map(|e| e.0).collect();
        let en: Vec<f64> = errs.iter().map(|e| e.1).collect();
        let rl2 = rates(&l2);
        let ren = rates(&en);
        assert!(
            rl2.last().unwrap() >= &1.7,
            "L2 rates {rl2:?} (errors {l2:?})"
        );
        assert!(ren.last().unwrap() >= &0.9, "energy rates {ren:?}");
    }
}
