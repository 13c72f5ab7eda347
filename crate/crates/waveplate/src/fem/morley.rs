//! Morley nonconforming triangle for fourth-order problems.
//!
//! Degrees of freedom: values at the three vertices and normal derivatives
//! at the three edge midpoints. The normal-derivative dofs use a global
//! per-edge orientation (the unit normal obtained by rotating the
//! lower-to-higher-index edge direction), so neighbouring elements agree on
//! the dof value and only the local sign differs.

use crate::linalg::dense::dense_solve;
use crate::mesh::Point2;

/// Quadratic shape functions of one Morley triangle in scaled local
/// coordinates, with exact constant second derivatives.
pub struct MorleyElement {
    /// Monomial coefficients per shape function: [1, ξ, η, ξ², ξη, η²].
    coeffs: [[f64; 6]; 6],
    center: Point2,
    scale: f64,
    /// Global second derivatives (w_xx, w_yy, w_xy) of each shape function.
    pub curvature: [[f64; 3]; 6],
    /// Signs relating the local outward normal to the global edge normal,
    /// one per edge dof (local edge k is opposite vertex k).
    pub edge_signs: [f64; 3],
}

/// Global orientation convention for a mesh edge: unit normal of the edge
/// from its lower-index vertex to the higher one, rotated clockwise.
pub fn global_edge_normal(pa: Point2, pb: Point2) -> [f64; 2] {
    let len = pa.dist(&pb);
    [(pb.y - pa.y) / len, -(pb.x - pa.x) / len]
}

impl MorleyElement {
    /// `points` are the triangle vertices in ccw order; `edge_normals[k]`
    /// is the global normal of the edge opposite vertex k.
    pub fn new(points: [Point2; 3], edge_normals: [[f64; 2]; 3]) -> Self {
        let center = Point2::new(
            (points[0].x + points[1].x + points[2].x) / 3.0,
            (points[0].y + points[1].y + points[2].y) / 3.0,
        );
        let mut scale = 0.0f64;
        for k in 0..3 {
            scale = scale.max(points[k].dist(&points[(k + 1) % 3]));
        }
        let local = |p: Point2| -> [f64; 2] { [(p.x - center.x) / scale, (p.y - center.y) / scale] };

        // Monomial values / normal derivatives of the local basis.
        let value_row = |q: [f64; 2]| -> [f64; 6] {
            let [x, y] = q;
            [1.0, x, y, x * x, x * y, y * y]
        };
        let normal_row = |q: [f64; 2], n: [f64; 2]| -> [f64; 6] {
            let [x, y] = q;
            // Gradient of each monomial in local coords, dotted with n, then
            // divided by the coordinate scale to act on global positions.
            [
                0.0,
                n[0] / scale,
                n[1] / scale,
                2.0 * x * n[0] / scale,
                (y * n[0] + x * n[1]) / scale,
                2.0 * y * n[1] / scale,
            ]
        };

        let mut rows = [[0.0; 6]; 6];
        for k in 0..3 {
            rows[k] = value_row(local(points[k]));
        }
        for k in 0..3 {
            let a = points[(k + 1) % 3];
            let b = points[(k + 2) % 3];
            let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
            rows[3 + k] = normal_row(local(mid), edge_normals[k]);
        }

        // Invert the generalized Vandermonde column by column.
        let mat: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let mut coeffs = [[0.0; 6]; 6];
        for j in 0..6 {
            let mut e = vec![0.0; 6];
            e[j] = 1.0;
            let c = dense_solve(&mat, &e).expect("Morley dof matrix is nonsingular");
            for (i, v) in c.iter().enumerate() {
                coeffs[j][i] = *v;
            }
        }

        let mut curvature = [[0.0; 3]; 6];
        let s2 = scale * scale;
        for j in 0..6 {
            curvature[j] = [
                2.0 * coeffs[j][3] / s2,
                2.0 * coeffs[j][5] / s2,
                coeffs[j][4] / s2,
            ];
        }

        // Local outward sign of each edge dof.
        let mut edge_signs = [1.0; 3];
        for k in 0..3 {
            let a = points[(k + 1) % 3];
            let b = points[(k + 2) % 3];
            let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
            let out = [mid.x - center.x, mid.y - center.y];
            let n = edge_normals[k];
            edge_signs[k] = if n[0] * out[0] + n[1] * out[1] >= 0.0 {
                1.0
            } else {
                -1.0
            };
        }

        MorleyElement {
            coeffs,
            center,
            scale,
            curvature,
            edge_signs,
        }
    }

    pub fn eval(&self, j: usize, p: Point2) -> f64 {
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        let c = &self.coeffs[j];
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    }

    pub fn grad(&self, j: usize, p: Point2) -> [f64; 2] {
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        let c = &self.coeffs[j];
        [
            (c[1] + 2.0 * c[3] * x + c[4] * y) / self.scale,
            (c[2] + c[4] * x + 2.0 * c[5] * y) / self.scale,
        ]
    }
}

/// Morley interpolation dofs of a smooth function: vertex values and
/// global-normal midpoint derivatives.
pub fn interpolate_dofs(
    points: [Point2; 3],
    edge_normals: [[f64; 2]; 3],
    f: &dyn Fn(Point2) -> f64,
    grad_f: &dyn Fn(Point2) -> [f64; 2],
) -> [f64; 6] {
    let mut dofs = [0.0; 6];
    for k in 0..3 {
        dofs[k] = f(points[k]);
    }
    for k in 0..3 {
        let a = points[(k + 1) % 3];
        let b = points[(k + 2) % 3];
        let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        let g = grad_f(mid);
        dofs[3 + k] = g[0] * edge_normals[k][0] + g[1] * edge_normals[k][1];
    }
    dofs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn element(points: [Point2; 3]) -> (MorleyElement, [[f64; 2]; 3]) {
        let mut normals = [[0.0; 2]; 3];
        for k in 0..3 {
            let a = points[(k + 1) % 3];
            let b = points[(k + 2) % 3];
            normals[k] = global_edge_normal(a, b);
        }
        (MorleyElement::new(points, normals), normals)
    }

    #[test]
    fn shape_functions_satisfy_kronecker_property() {
        let points = [
            Point2::new(0.2, -0.1),
            Point2::new(1.3, 0.4),
            Point2::new(0.5, 1.1),
        ];
        let (el, normals) = element(points);
        for j in 0..6 {
            for k in 0..3 {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((el.eval(j, points[k]) - expect).abs() < 1e-12);
            }
            for k in 0..3 {
                let a = points[(k + 1) % 3];
                let b = points[(k + 2) % 3];
                let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
                let g = el.grad(j, mid);
                let dn = g[0] * normals[k][0] + g[1] * normals[k][1];
                let expect = if j == 3 + k { 1.0 } else { 0.0 };
                assert!((dn - expect).abs() < 1e-11, "j={j} k={k} dn={dn}");
            }
        }
    }

    #[test]
    fn quadratic_reproduction_is_exact() {
        let points = [
            Point2::new(0.0, 0.0),
            Point2::new(0.9, 0.2),
            Point2::new(0.3, 0.8),
        ];
        let (el, normals) = element(points);
        // q = 1 + 2x - y + 3x^2 - xy + 0.5 y^2.
        let q = |p: Point2| 1.0 + 2.0 * p.x - p.y + 3.0 * p.x * p.x - p.x * p.y + 0.5 * p.y * p.y;
        let gq = |p: Point2| [2.0 + 6.0 * p.x - p.y, -1.0 - p.x + p.y];
        let dofs = interpolate_dofs(points, normals, &q, &gq);
        // Exact second derivatives: (6, 1, -1).
        let mut hxx = 0.0;
        let mut hyy = 0.0;
        let mut hxy = 0.0;
        for j in 0..6 {
            hxx += dofs[j] * el.curvature[j][0];
            hyy += dofs[j] * el.curvature[j][1];
            hxy += dofs[j] * el.curvature[j][2];
        }
        assert!((hxx - 6.0).abs() < 1e-12);
        assert!((hyy - 1.0).abs() < 1e-12);
        assert!((hxy + 1.0).abs() < 1e-12);
        // Pointwise reproduction everywhere in the element.
        for &(a, b) in &[(0.3, 0.3), (0.1, 0.7), (0.5, 0.25)] {
            let p = Point2::new(
                points[0].x * (1.0 - a - b) + points[1].x * a + points[2].x * b,
                points[0].y * (1.0 - a - b) + points[1].y * a + points[2].y * b,
            );
            let mut val = 0.0;
            for j in 0..6 {
                val += dofs[j] * el.eval(j, p);
            }
            assert!((val - q(p)).abs() < 1e-11);
        }
    }

    #[test]
    fn affine_interpolant_has_zero_curvature() {
        let points = [
            Point2::new(-0.5, 0.1),
            Point2::new(0.7, -0.3),
            Point2::new(0.2, 0.9),
        ];
        let (el, normals) = element(points);
        let f = |p: Point2| 3.0 - 0.7 * p.x + 2.2 * p.y;
        let gf = |_p: Point2| [-0.7, 2.2];
        let dofs = interpolate_dofs(points, normals, &f, &gf);
        for c in 0..3 {
            let mut h = 0.0;
            for j in 0..6 {
                h += dofs[j] * el.curvature[j][c];
            }
            assert!(h.abs() < 1e-13);
        }
    }
}
