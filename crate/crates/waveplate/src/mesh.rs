//! Two-subdomain triangulations with tagged boundaries.
//!
//! A [`TriMesh`] triangulates Ω = Ω₁ ∪ Ω₂ where the two open subdomains meet
//! along a straight interface. Every boundary or interface edge carries
//! exactly one tag: `Gamma1` (exterior boundary of Ω₁), `Gamma2` (exterior
//! boundary of Ω₂) or `Interface`. The interface is required to be straight;
//! curved interfaces are rejected at validation time rather than
//! approximated.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Omega1,
    Omega2,
}

#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v: [usize; 3],
    pub domain: Subdomain,
}

#[derive(Debug, Clone, Copy)]
pub struct TaggedEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub tagged_edges: Vec<TaggedEdge>,
    /// Maximum edge length over the whole mesh.
    pub h: f64,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Builds a mesh from raw pieces, reorienting negatively oriented
    /// triangles and checking every structural invariant.
    pub fn new(
        vertices: Vec<Point2>,
        mut triangles: Vec<Triangle>,
        tagged_edges: Vec<TaggedEdge>,
    ) -> Result<TriMesh> {
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &vi in &tri.v {
                if vi >= vertices.len() {
                    return Err(Error::validation(format!(
                        "triangle {t} references vertex {vi} out of range"
                    )));
                }
            }
            if tri.v[0] == tri.v[1] || tri.v[1] == tri.v[2] || tri.v[0] == tri.v[2] {
                return Err(Error::validation(format!(
                    "triangle {t} has a duplicate vertex index"
                )));
            }
            if signed_area(&vertices, tri.v) < 0.0 {
                tri.v.swap(1, 2);
            }
        }
        let mut h = 0.0f64;
        for tri in &triangles {
            for k in 0..3 {
                let a = vertices[tri.v[k]];
                let b = vertices[tri.v[(k + 1) % 3]];
                h = h.max(a.dist(&b));
            }
        }
        if h == 0.0 {
            return Err(Error::validation("mesh has no edges".to_string()));
        }
        let mesh = TriMesh {
            vertices,
            triangles,
            tagged_edges,
            h,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        for (i, p) in self.vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::validation(format!("vertex {i} is not finite")));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = signed_area(&self.vertices, tri.v);
            if area <= 1e-14 * self.h * self.h {
                return Err(Error::validation(format!(
                    "triangle {t} is degenerate (area {area:.3e})"
                )));
            }
        }
        for (e, edge) in self.tagged_edges.iter().enumerate() {
            for &vi in &edge.v {
                if vi >= self.vertices.len() {
                    return Err(Error::validation(format!(
                        "tagged edge {e} references vertex {vi} out of range"
                    )));
                }
            }
            if edge.v[0] == edge.v[1] {
                return Err(Error::validation(format!("tagged edge {e} is degenerate")));
            }
        }

        // Incidence map: every mesh edge -> incident triangles per subdomain.
        let incidence = self.edge_incidence();
        let mut tag_by_key: HashMap<(usize, usize), (usize, BoundaryTag)> = HashMap::new();
        for (e, edge) in self.tagged_edges.iter().enumerate() {
            let key = edge_key(edge.v[0], edge.v[1]);
            if tag_by_key.insert(key, (e, edge.tag)).is_some() {
                return Err(Error::validation(format!(
                    "edge ({}, {}) is tagged more than once",
                    edge.v[0], edge.v[1]
                )));
            }
            let Some(inc) = incidence.get(&key) else {
                return Err(Error::validation(format!(
                    "tagged edge {e} ({}, {}) is not an edge of any triangle",
                    edge.v[0], edge.v[1]
                )));
            };
            let n1 = inc.omega1.len();
            let n2 = inc.omega2.len();
            match edge.tag {
                BoundaryTag::Interface => {
                    if n1 != 1 || n2 != 1 {
                        return Err(Error::validation(format!(
                            "interface edge {e} ({}, {}) must be shared by exactly one \
                             Omega1 and one Omega2 triangle (found {n1} and {n2})",
                            edge.v[0], edge.v[1]
                        )));
                    }
                }
                BoundaryTag::Gamma1 => {
                    if n1 != 1 || n2 != 0 {
                        return Err(Error::validation(format!(
                            "gamma1 edge {e} ({}, {}) must belong to exactly one Omega1 \
                             triangle (found {n1} Omega1, {n2} Omega2)",
                            edge.v[0], edge.v[1]
                        )));
                    }
                }
                BoundaryTag::Gamma2 => {
                    if n2 != 1 || n1 != 0 {
                        return Err(Error::validation(format!(
                            "gamma2 edge {e} ({}, {}) must belong to exactly one Omega2 \
                             triangle (found {n1} Omega1, {n2} Omega2)",
                            edge.v[0], edge.v[1]
                        )));
                    }
                }
            }
        }
        for (key, inc) in &incidence {
            let total = inc.omega1.len() + inc.omega2.len();
            let tagged = tag_by_key.contains_key(key);
            if total == 1 && !tagged {
                return Err(Error::validation(format!(
                    "boundary edge ({}, {}) carries no tag",
                    key.0, key.1
                )));
            }
            if total > 2 {
                return Err(Error::validation(format!(
                    "edge ({}, {}) is shared by {total} triangles",
                    key.0, key.1
                )));
            }
            if total == 2 && !inc.omega1.is_empty() && !inc.omega2.is_empty() && !tagged {
                return Err(Error::validation(format!(
                    "subdomain interface edge ({}, {}) carries no tag",
                    key.0, key.1
                )));
            }
            if total == 2 && tagged && (inc.omega1.len() == 2 || inc.omega2.len() == 2) {
                return Err(Error::validation(format!(
                    "interior edge ({}, {}) must not be tagged",
                    key.0, key.1
                )));
            }
        }

        // Interface straightness.
        if self.interface_collinearity_residual() > 1e-9 * self.h {
            return Err(Error::validation(format!(
                "interface is not straight (collinearity residual {:.3e})",
                self.interface_collinearity_residual()
            )));
        }
        Ok(())
    }

    /// Max distance of interface vertices to the line through the first
    /// interface edge.
    pub fn interface_collinearity_residual(&self) -> f64 {
        let edges: Vec<&TaggedEdge> = self
            .tagged_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Interface)
            .collect();
        if edges.is_empty() {
            return 0.0;
        }
        let p0 = self.vertices[edges[0].v[0]];
        let p1 = self.vertices[edges[0].v[1]];
        let len = p0.dist(&p1);
        let dir = [(p1.x - p0.x) / len, (p1.y - p0.y) / len];
        let mut worst = 0.0f64;
        for e in &edges {
            for &vi in &e.v {
                let p = self.vertices[vi];
                let d = (p.x - p0.x) * dir[1] - (p.y - p0.y) * dir[0];
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub(crate) fn edge_incidence(&self) -> HashMap<(usize, usize), EdgeIncidence> {
        let mut map: HashMap<(usize, usize), EdgeIncidence> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(tri.v[k], tri.v[(k + 1) % 3]);
                let inc = map.entry(key).or_default();
                match tri.domain {
                    Subdomain::Omega1 => inc.omega1.push(t),
                    Subdomain::Omega2 => inc.omega2.push(t),
                }
            }
        }
        map
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t].v)
    }

    pub fn tri_points(&self, t: usize) -> [Point2; 3] {
        let v = self.triangles[t].v;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn edge_length(&self, e: &TaggedEdge) -> f64 {
        self.vertices[e.v[0]].dist(&self.vertices[e.v[1]])
    }

    pub fn edge_midpoint(&self, e: &TaggedEdge) -> Point2 {
        let a = self.vertices[e.v[0]];
        let b = self.vertices[e.v[1]];
        Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
    }

    /// Unit normal of a tagged edge pointing outward from `from`. For a
    /// gamma edge `from` must be the owning subdomain; for an interface edge
    /// either side may be requested (the two normals are opposite).
    pub fn outward_normal(&self, e: &TaggedEdge, from: Subdomain) -> Result<[f64; 2]> {
        let key = edge_key(e.v[0], e.v[1]);
        let incidence = self.edge_incidence();
        let inc = incidence
            .get(&key)
            .ok_or_else(|| Error::validation("edge not in mesh".to_string()))?;
        let owner = match from {
            Subdomain::Omega1 => inc.omega1.first(),
            Subdomain::Omega2 => inc.omega2.first(),
        };
        let &t = owner.ok_or_else(|| {
            Error::validation(format!(
                "edge ({}, {}) has no triangle in the requested subdomain",
                e.v[0], e.v[1]
            ))
        })?;
        Ok(self.outward_normal_from_triangle(e, t))
    }

    pub(crate) fn outward_normal_from_triangle(&self, e: &TaggedEdge, t: usize) -> [f64; 2] {
        let a = self.vertices[e.v[0]];
        let b = self.vertices[e.v[1]];
        let len = a.dist(&b);
        let mut n = [(b.y - a.y) / len, -(b.x - a.x) / len];
        let pts = self.tri_points(t);
        let cx = (pts[0].x + pts[1].x + pts[2].x) / 3.0;
        let cy = (pts[0].y + pts[1].y + pts[2].y) / 3.0;
        let mx = 0.5 * (a.x + b.x);
        let my = 0.5 * (a.y + b.y);
        if n[0] * (mx - cx) + n[1] * (my - cy) < 0.0 {
            n[0] = -n[0];
            n[1] = -n[1];
        }
        n
    }

    /// Vertex indices incident to at least one edge with the given tag,
    /// sorted ascending.
    pub fn tagged_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut seen = vec![false; self.vertices.len()];
        for e in &self.tagged_edges {
            if e.tag == tag {
                seen[e.v[0]] = true;
                seen[e.v[1]] = true;
            }
        }
        (0..self.vertices.len()).filter(|&i| seen[i]).collect()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> Vec<&TaggedEdge> {
        self.tagged_edges.iter().filter(|e| e.tag == tag).collect()
    }

    /// Total length of all edges with the given tag.
    pub fn tagged_length(&self, tag: BoundaryTag) -> f64 {
        self.edges_with_tag(tag)
            .iter()
            .map(|e| self.edge_length(e))
            .sum()
    }

    pub fn subdomain_area(&self, domain: Subdomain) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].domain == domain)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn domain_diameter(&self) -> f64 {
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        ((xmax - xmin).powi(2) + (ymax - ymin).powi(2)).sqrt()
    }
}

#[derive(Debug, Default, Clone)]
pub(crate) struct EdgeIncidence {
    pub omega1: Vec<usize>,
    pub omega2: Vec<usize>,
}

fn signed_area(vertices: &[Point2], v: [usize; 3]) -> f64 {
    let [a, b, c] = [vertices[v[0]], vertices[v[1]], vertices[v[2]]];
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Structured mesh of Ω = [-1,1]×[0,1] split by the interface {0}×[0,1],
/// with Ω₁ = [-1,0]×[0,1] (wave) and Ω₂ = [0,1]×[0,1] (plate). `n` is the
/// number of subdivisions per unit length.
pub fn gen_rect_transmission(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::invalid_argument("n must be at least 1"));
    }
    let nx = 2 * n; // columns across [-1, 1]
    let ny = n;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point2::new(-1.0 + i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let mut triangles = Vec::with_capacity(4 * n * n);
    for j in 0..ny {
        for i in 0..nx {
            let domain = if i < n {
                Subdomain::Omega1
            } else {
                Subdomain::Omega2
            };
            let (v00, v10) = (vid(i, j), vid(i + 1, j));
            let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
            triangles.push(Triangle {
                v: [v00, v10, v11],
                domain,
            });
            triangles.push(Triangle {
                v: [v00, v11, v01],
                domain,
            });
        }
    }
    let mut tagged_edges = Vec::new();
    for j in 0..ny {
        tagged_edges.push(TaggedEdge {
            v: [vid(n, j), vid(n, j + 1)],
            tag: BoundaryTag::Interface,
        });
        tagged_edges.push(TaggedEdge {
            v: [vid(0, j), vid(0, j + 1)],
            tag: BoundaryTag::Gamma1,
        });
        tagged_edges.push(TaggedEdge {
            v: [vid(nx, j), vid(nx, j + 1)],
            tag: BoundaryTag::Gamma2,
        });
    }
    for i in 0..nx {
        let tag = if i < n {
            BoundaryTag::Gamma1
        } else {
            BoundaryTag::Gamma2
        };
        tagged_edges.push(TaggedEdge {
            v: [vid(i, 0), vid(i + 1, 0)],
            tag,
        });
        tagged_edges.push(TaggedEdge {
            v: [vid(i, ny), vid(i + 1, ny)],
            tag,
        });
    }
    TriMesh::new(vertices, triangles, tagged_edges)
}

/// Lens-shaped transmission geometry: two circular segments sharing the
/// straight chord {0}×[-1,1]. The wave domain Ω₁ is the left segment with
/// tangent-chord angle `alpha1` at the chord endpoints; the plate domain Ω₂
/// is the right segment with angle `alpha2`. The chord midpoint (0, 0) is
/// the natural multiplier point x₀ for this family.
///
/// `n` controls resolution: `n` radial layers and `3n` angular steps per
/// side, so the interface carries `2n` edges.
pub fn gen_lens(alpha1: f64, alpha2: f64, n: usize) -> Result<TriMesh> {
    if !(alpha2 > 0.0 && alpha2 <= alpha1 && alpha1 < std::f64::consts::PI) {
        return Err(Error::invalid_argument(format!(
            "need 0 < alpha2 <= alpha1 < pi, got alpha1 = {alpha1}, alpha2 = {alpha2}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid_argument("n must be at least 1"));
    }
    let n_r = n;
    let n_a = 3 * n;
    let pi = std::f64::consts::PI;

    // Distance from the chord midpoint to the arc along direction theta.
    // The arc with tangent-chord angle alpha has center (±cot(alpha), 0)
    // and radius 1/sin(alpha) for a chord of half-length 1.
    let ray = |cx: f64, theta: f64| -> f64 {
        let c = cx * theta.cos();
        c + (c * c + 1.0).sqrt()
    };
    let c1 = 1.0 / alpha1.tan(); // wave-side center x (arc bulges left)
    let c2 = -1.0 / alpha2.tan(); // plate-side center x (arc bulges right)

    let mut vertices = vec![Point2::new(0.0, 0.0)];
    let mut index: HashMap<(i8, usize, usize), usize> = HashMap::new();
    let mut chord = |vertices: &mut Vec<Point2>, y: f64, i: usize, up: bool| -> usize {
        // Chord vertices are shared between the two sides.
        let key = (0i8, i, if up { 1 } else { 0 });
        *index.entry(key).or_insert_with(|| {
            vertices.push(Point2::new(0.0, y));
            vertices.len() - 1
        })
    };

    let mut triangles = Vec::new();
    let mut tagged_edges = Vec::new();

    for (side, cx, theta0, domain, tag) in [
        (1i8, c1, 0.5 * pi, Subdomain::Omega1, BoundaryTag::Gamma1),
        (2i8, c2, -0.5 * pi, Subdomain::Omega2, BoundaryTag::Gamma2),
    ] {
        // Vertex grid for this side; ring i = 1..=n_r, angle j = 0..=n_a.
        let mut grid = vec![0usize; (n_r + 1) * (n_a + 1)];
        let gid = |i: usize, j: usize| i * (n_a + 1) + j;
        for i in 1..=n_r {
            let r = i as f64 / n_r as f64;
            for j in 0..=n_a {
                let theta = theta0 + pi * j as f64 / n_a as f64;
                let id = if j == 0 || j == n_a {
                    // On the chord: theta0 is +pi/2 (top) for the wave side
                    // and -pi/2 (bottom) for the plate side.
                    let up = (j == 0) == (side == 1);
                    chord(&mut vertices, if up { r } else { -r }, i, up)
                } else {
                    let t = r * ray(cx, theta);
                    vertices.push(Point2::new(t * theta.cos(), t * theta.sin()));
                    vertices.len() - 1
                };
                grid[gid(i, j)] = id;
            }
        }
        // Central fan.
        for j in 0..n_a {
            triangles.push(Triangle {
                v: [0, grid[gid(1, j)], grid[gid(1, j + 1)]],
                domain,
            });
        }
        // Annuli, split along the shorter quad diagonal.
        for i in 1..n_r {
            for j in 0..n_a {
                let (a, b) = (grid[gid(i, j)], grid[gid(i, j + 1)]);
                let (c, d) = (grid[gid(i + 1, j)], grid[gid(i + 1, j + 1)]);
                if vertices[a].dist(&vertices[d]) <= vertices[b].dist(&vertices[c]) {
                    triangles.push(Triangle { v: [a, c, d], domain });
                    triangles.push(Triangle { v: [a, d, b], domain });
                } else {
                    triangles.push(Triangle { v: [a, c, b], domain });
                    triangles.push(Triangle { v: [b, c, d], domain });
                }
            }
        }
        // Outer arc.
        for j in 0..n_a {
            tagged_edges.push(TaggedEdge {
                v: [grid[gid(n_r, j)], grid[gid(n_r, j + 1)]],
                tag,
            });
        }
        // Interface edges once (from the wave side).
        if side == 1 {
            for up in [true, false] {
                let sign = if up { 1.0 } else { -1.0 };
                let mut prev = 0usize;
                for i in 1..=n_r {
                    let cur = chord(&mut vertices, sign * i as f64 / n_r as f64, i, up);
                    tagged_edges.push(TaggedEdge {
                        v: [prev, cur],
                        tag: BoundaryTag::Interface,
                    });
                    prev = cur;
                }
            }
        }
    }
    TriMesh::new(vertices, triangles, tagged_edges)
}

/// Splits every triangle into four by edge midpoints. Boundary tags are
/// inherited by the two child edges of each tagged edge.
pub fn refine_uniform(mesh: &TriMesh) -> Result<TriMesh> {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |vertices: &mut Vec<Point2>, a: usize, b: usize| -> usize {
        let key = edge_key(a, b);
        *midpoint.entry(key).or_insert_with(|| {
            let pa = vertices[a];
            let pb = vertices[b];
            vertices.push(Point2::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let [a, b, c] = tri.v;
        let ab = mid(&mut vertices, a, b);
        let bc = mid(&mut vertices, b, c);
        let ca = mid(&mut vertices, c, a);
        for v in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
            triangles.push(Triangle {
                v,
                domain: tri.domain,
            });
        }
    }
    let mut tagged_edges = Vec::with_capacity(2 * mesh.tagged_edges.len());
    for e in &mesh.tagged_edges {
        let m = mid(&mut vertices, e.v[0], e.v[1]);
        tagged_edges.push(TaggedEdge {
            v: [e.v[0], m],
            tag: e.tag,
        });
        tagged_edges.push(TaggedEdge {
            v: [m, e.v[1]],
            tag: e.tag,
        });
    }
    TriMesh::new(vertices, triangles, tagged_edges)
}

// ---------------------------------------------------------------------------
// Corner angles
// ---------------------------------------------------------------------------

/// One corner of a subdomain boundary polyline.
#[derive(Debug, Clone, Copy)]
pub struct Corner {
    pub vertex: usize,
    pub point: Point2,
    /// Interior angle of the subdomain at this vertex, in (0, 2π].
    pub angle: f64,
}

/// Tangent turn (in radians) below which a boundary vertex is considered a
/// plain discretization vertex of a smooth boundary rather than a corner.
/// Polygonal approximations of the arcs generated here turn by at most a
/// few degrees per vertex at the resolutions in use, while genuine corners
/// turn by far more.
pub const CORNER_TURN_THRESHOLD: f64 = 0.15;

/// Corners of the boundary polyline of one subdomain.
///
/// A vertex is reported when its tangent turn exceeds
/// [`CORNER_TURN_THRESHOLD`], or always when it is an interface endpoint
/// (where Γᵢ meets I) — such endpoints are reported even if locally straight,
/// with angle π. The interior angle is the sum of the incident subdomain
/// triangle angles, so reflex corners are measured correctly.
pub fn corner_angles(mesh: &TriMesh, domain: Subdomain) -> Vec<Corner> {
    // Angle sums per vertex over triangles of this subdomain.
    let mut angle_sum = vec![0.0f64; mesh.vertices.len()];
    for tri in mesh.triangles.iter().filter(|t| t.domain == domain) {
        for k in 0..3 {
            let p = mesh.vertices[tri.v[k]];
            let q = mesh.vertices[tri.v[(k + 1) % 3]];
            let r = mesh.vertices[tri.v[(k + 2) % 3]];
            let u = [q.x - p.x, q.y - p.y];
            let v = [r.x - p.x, r.y - p.y];
            let dot = u[0] * v[0] + u[1] * v[1];
            let cross = u[0] * v[1] - u[1] * v[0];
            angle_sum[tri.v[k]] += cross.abs().atan2(dot);
        }
    }

    // Boundary vertices of this subdomain and their incident tag kinds.
    let relevant = |tag: BoundaryTag| match domain {
        Subdomain::Omega1 => tag == BoundaryTag::Gamma1 || tag == BoundaryTag::Interface,
        Subdomain::Omega2 => tag == BoundaryTag::Gamma2 || tag == BoundaryTag::Interface,
    };
    let mut has_gamma = vec![false; mesh.vertices.len()];
    let mut has_interface = vec![false; mesh.vertices.len()];
    let mut on_boundary = vec![false; mesh.vertices.len()];
    for e in &mesh.tagged_edges {
        if !relevant(e.tag) {
            continue;
        }
        for &vi in &e.v {
            on_boundary[vi] = true;
            match e.tag {
                BoundaryTag::Interface => has_interface[vi] = true,
                _ => has_gamma[vi] = true,
            }
        }
    }

    let mut corners = Vec::new();
    for vi in 0..mesh.vertices.len() {
        if !on_boundary[vi] {
            continue;
        }
        let angle = angle_sum[vi];
        let turn = (std::f64::consts::PI - angle).abs();
        let endpoint = has_gamma[vi] && has_interface[vi];
        if endpoint || turn > CORNER_TURN_THRESHOLD {
            corners.push(Corner {
                vertex: vi,
                point: mesh.vertices[vi],
                angle,
            });
        }
    }
    corners
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Parses the text mesh format:
///
/// ```text
/// vertices N
/// id x y            (N lines)
/// triangles M
/// id v1 v2 v3 domain
/// edges K
/// id v1 v2 tag
/// ```
///
/// `#` starts a comment; ids must be 0-based and contiguous.
pub fn parse_mesh(text: &str) -> Result<TriMesh> {
    let all_lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut cursor = all_lines.into_iter();
    let mut lines = std::iter::from_fn(move || cursor.next());

    let expect_header = |lines: &mut dyn Iterator<Item = (usize, &str)>,
                             name: &str|
     -> Result<usize> {
        let (ln, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing `{name}` section"),
        })?;
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or("");
        if word != name {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected `{name} N`, found `{line}`"),
            });
        }
        parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                line: ln,
                msg: format!("expected a count after `{name}`"),
            })
    };

    let nv = expect_header(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for want in 0..nv {
        let (ln, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("expected {nv} vertex lines"),
        })?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: ln,
                msg: "vertex line must be `id x y`".to_string(),
            });
        }
        let id: usize = f[0].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad vertex id `{}`", f[0]),
        })?;
        if id != want {
            return Err(Error::Parse {
                line: ln,
                msg: format!("vertex ids must be contiguous; expected {want}, found {id}"),
            });
        }
        let x: f64 = f[1].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad coordinate `{}`", f[1]),
        })?;
        let y: f64 = f[2].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad coordinate `{}`", f[2]),
        })?;
        vertices.push(Point2::new(x, y));
    }

    let nt = expect_header(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for want in 0..nt {
        let (ln, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("expected {nt} triangle lines"),
        })?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::Parse {
                line: ln,
                msg: "triangle line must be `id v1 v2 v3 domain`".to_string(),
            });
        }
        let id: usize = f[0].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad triangle id `{}`", f[0]),
        })?;
        if id != want {
            return Err(Error::Parse {
                line: ln,
                msg: format!("triangle ids must be contiguous; expected {want}, found {id}"),
            });
        }
        let mut v = [0usize; 3];
        for k in 0..3 {
            v[k] = f[k + 1].parse().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("bad vertex index `{}`", f[k + 1]),
            })?;
        }
        let domain = match f[4] {
            "1" => Subdomain::Omega1,
            "2" => Subdomain::Omega2,
            other => {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("domain must be 1 or 2, found `{other}`"),
                })
            }
        };
        triangles.push(Triangle { v, domain });
    }

    let ne = expect_header(&mut lines, "edges")?;
    let mut tagged_edges = Vec::with_capacity(ne);
    for want in 0..ne {
        let (ln, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("expected {ne} edge lines"),
        })?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line: ln,
                msg: "edge line must be `id v1 v2 tag`".to_string(),
            });
        }
        let id: usize = f[0].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad edge id `{}`", f[0]),
        })?;
        if id != want {
            return Err(Error::Parse {
                line: ln,
                msg: format!("edge ids must be contiguous; expected {want}, found {id}"),
            });
        }
        let v0: usize = f[1].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad vertex index `{}`", f[1]),
        })?;
        let v1: usize = f[2].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad vertex index `{}`", f[2]),
        })?;
        let tag = match f[3] {
            "gamma1" => BoundaryTag::Gamma1,
            "gamma2" => BoundaryTag::Gamma2,
            "interface" => BoundaryTag::Interface,
            other => {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("tag must be gamma1, gamma2 or interface, found `{other}`"),
                })
            }
        };
        tagged_edges.push(TaggedEdge { v: [v0, v1], tag });
    }
    if let Some((ln, line)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            msg: format!("unexpected trailing content `{line}`"),
        });
    }

    TriMesh::new(vertices, triangles, tagged_edges)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn format_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for (i, p) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(out, "{i} {:.16e} {:.16e}", p.x, p.y);
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for (i, t) in mesh.triangles.iter().enumerate() {
        let d = match t.domain {
            Subdomain::Omega1 => 1,
            Subdomain::Omega2 => 2,
        };
        let _ = writeln!(out, "{i} {} {} {} {d}", t.v[0], t.v[1], t.v[2]);
    }
    let _ = writeln!(out, "edges {}", mesh.tagged_edges.len());
    for (i, e) in mesh.tagged_edges.iter().enumerate() {
        let tag = match e.tag {
            BoundaryTag::Gamma1 => "gamma1",
            BoundaryTag::Gamma2 => "gamma2",
            BoundaryTag::Interface => "interface",
        };
        let _ = writeln!(out, "{i} {} {} {tag}", e.v[0], e.v[1]);
    }
    out
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}
