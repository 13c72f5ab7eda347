//! Gaussian quadrature on triangles and boundary edges.
//!
//! Triangle rules are returned in barycentric coordinates with weights
//! normalized to sum to one, so `area * Σ w_q f(p_q)` integrates `f`.
//! Edge rules use the parameter t ∈ [0, 1] along the segment, likewise
//! normalized, so `length * Σ w_q f(p(t_q))` integrates over the edge.

/// Quadrature node on a triangle: barycentric coordinates plus weight.
#[derive(Debug, Clone, Copy)]
pub struct TriNode {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Quadrature node on a segment: parameter in [0, 1] plus weight.
#[derive(Debug, Clone, Copy)]
pub struct EdgeNode {
    pub t: f64,
    pub weight: f64,
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial. Accurate to machine precision for the sizes
/// used here.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be positive");
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Edge rule exact for polynomials of degree `degree` along the segment.
pub fn edge_rule(degree: usize) -> Vec<EdgeNode> {
    let n = degree / 2 + 1; // 2n - 1 >= degree
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| EdgeNode {
            t: 0.5 * (x + 1.0),
            weight: 0.5 * w,
        })
        .collect()
}

/// The classical 7-point degree-5 symmetric triangle rule.
fn tri_rule_deg5() -> Vec<TriNode> {
    let mut nodes = vec![TriNode {
        bary: [1.0 / 3.0; 3],
        weight: 0.225,
    }];
    let orbits = [
        (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506),
        (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827),
    ];
    for &(a, b, w) in &orbits {
        for perm in [[a, b, b], [b, a, b], [b, b, a]] {
            nodes.push(TriNode {
                bary: perm,
                weight: w,
            });
        }
    }
    nodes
}

/// Conical-product rule on the triangle, exact for total degree `degree`.
///
/// Built from Gauss-Legendre tensor nodes through the collapsed-square map
/// x = u, y = v(1-u); the extra (1-u) Jacobian factor forces one more point
/// in the u direction.
fn tri_rule_conical(degree: usize) -> Vec<TriNode> {
    let nu = (degree + 1) / 2 + 1; // 2*nu - 1 >= degree + 1
    let nv = degree / 2 + 1;
    let gu: Vec<(f64, f64)> = gauss_legendre(nu)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let gv: Vec<(f64, f64)> = gauss_legendre(nv)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let mut nodes = Vec::with_capacity(nu * nv);
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            let x = u;
            let y = v * (1.0 - u);
            nodes.push(TriNode {
                bary: [1.0 - x - y, x, y],
                weight: 2.0 * wu * wv * (1.0 - u),
            });
        }
    }
    nodes
}

/// Triangle rule exact for polynomials of total degree `degree`.
pub fn tri_rule(degree: usize) -> Vec<TriNode> {
    if degree <= 5 {
        tri_rule_deg5()
    } else {
        tri_rule_conical(degree)
    }
}

/// Low-order triangle rules for the quadrature-degree sweeps. Degree 1 is
/// the centroid rule, degree 2 the midpoint rule.
pub fn tri_rule_exact_up_to(degree: usize) -> Vec<TriNode> {
    match degree {
        1 => vec![TriNode {
            bary: [1.0 / 3.0; 3],
            weight: 1.0,
        }],
        2 => {
            let w = 1.0 / 3.0;
            [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
                .iter()
                .map(|&bary| TriNode { bary, weight: w })
                .collect()
        }
        d => tri_rule(d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^p y^q over the reference triangle (0,0),(1,0),(0,1).
    fn monomial_integral(p: u32, q: u32) -> f64 {
        // p! q! / (p + q + 2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(p) * fact(q) / fact(p + q + 2)
    }

    fn check_tri_rule(nodes: &[TriNode], degree: u32) {
        let area = 0.5;
        for p in 0..=degree {
            for q in 0..=(degree - p) {
                let mut acc = 0.0;
                for node in nodes {
                    // Reference triangle: vertex order (0,0), (1,0), (0,1).
                    let x = node.bary[1];
                    let y = node.bary[2];
                    acc += node.weight * x.powi(p as i32) * y.powi(q as i32);
                }
                let exact = monomial_integral(p, q);
                assert!(
                    (area * acc - exact).abs() < 1e-14,
                    "degree {degree} rule missed x^{p} y^{q}: {} vs {exact}",
                    area * acc
                );
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact() {
        for degree in 1..=10usize {
            check_tri_rule(&tri_rule(degree), degree as u32);
        }
        check_tri_rule(&tri_rule_exact_up_to(1), 1);
        check_tri_rule(&tri_rule_exact_up_to(2), 2);
    }

    #[test]
    fn seven_point_rule_is_degree_five() {
        let rule = tri_rule(5);
        assert_eq!(rule.len(), 7);
        check_tri_rule(&rule, 5);
    }

    #[test]
    fn edge_rules_are_exact() {
        for degree in 1..=11usize {
            let rule = edge_rule(degree);
            for p in 0..=degree {
                let acc: f64 = rule.iter().map(|n| n.weight * n.t.powi(p as i32)).sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!(
                    (acc - exact).abs() < 1e-14,
                    "edge degree {degree} missed t^{p}"
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for degree in [1, 3, 5, 7, 9] {
            let s: f64 = tri_rule(degree).iter().map(|n| n.weight).sum();
            assert!((s - 1.0).abs() < 1e-13);
            let se: f64 = edge_rule(degree).iter().map(|n| n.weight).sum();
            assert!((se - 1.0).abs() < 1e-14);
        }
    }
}
