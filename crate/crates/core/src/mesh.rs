//! Triangular meshes of the unit square with oriented facet topology.
//!
//! Element vertices are stored sorted by global index. Local facet `f` of
//! an element joins local vertices `LOCAL_FACETS[f]`, always from the lower
//! to the higher global vertex, so both neighbours traverse a shared facet
//! in the same direction.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HdgError, Result};

/// Local facets of the reference triangle as pairs of local vertices.
pub const LOCAL_FACETS: [[usize; 2]; 3] = [[0, 1], [1, 2], [0, 2]];

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Global vertices, ascending.
    pub vertices: [usize; 2],
    /// Lower-index neighbour.
    pub left: usize,
    pub local_left: usize,
    /// Higher-index neighbour, `None` on the boundary.
    pub right: Option<usize>,
    pub local_right: Option<usize>,
    /// Unit normal from `left` to `right` (outward on the boundary).
    pub normal: [f64; 2],
    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub tangent: [f64; 2],
    pub length: f64,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// Point at parameter `s ∈ [-1, 1]` along the tangent.
    pub fn point(&self, mesh: &Mesh, s: f64) -> [f64; 2] {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        let t = 0.5 * (1.0 + s);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// Global facet of each local facet.
    pub element_facets: Vec<[usize; 3]>,
    /// Longest edge per element.
    pub h: Vec<f64>,
}

/// Affine map from the reference triangle `(-1,0), (1,0), (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub matrix: [[f64; 2]; 2],
    pub offset: [f64; 2],
    pub det: f64,
    pub inverse_transpose: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn from_vertices(p: [[f64; 2]; 3]) -> Result<Self> {
        let offset = [0.5 * (p[0][0] + p[1][0]), 0.5 * (p[0][1] + p[1][1])];
        let c0 = [0.5 * (p[1][0] - p[0][0]), 0.5 * (p[1][1] - p[0][1])];
        let c1 = [p[2][0] - offset[0], p[2][1] - offset[1]];
        let matrix = [[c0[0], c1[0]], [c0[1], c1[1]]];
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        let scale = c0[0].abs() + c0[1].abs() + c1[0].abs() + c1[1].abs();
        if det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
            return Err(HdgError::SingularJacobian(det));
        }
        let inverse_transpose = [
            [matrix[1][1] / det, -matrix[1][0] / det],
            [-matrix[0][1] / det, matrix[0][0] / det],
        ];
        Ok(Self { matrix, offset, det, inverse_transpose })
    }

    pub fn identity() -> Self {
        Self { matrix: [[1.0, 0.0], [0.0, 1.0]], offset: [0.0, 0.0], det: 1.0, inverse_transpose: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn apply(&self, xr: [f64; 2]) -> [f64; 2] {
        let m = &self.matrix;
        [
            self.offset[0] + m[0][0] * xr[0] + m[0][1] * xr[1],
            self.offset[1] + m[1][0] * xr[0] + m[1][1] * xr[1],
        ]
    }

    pub fn inverse(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.offset[0], x[1] - self.offset[1]];
        let it = &self.inverse_transpose;
        // J^{-1} = (J^{-T})^T
        [it[0][0] * d[0] + it[1][0] * d[1], it[0][1] * d[0] + it[1][1] * d[1]]
    }

    /// `J^{-1}` as a row-major matrix.
    pub fn inverse_matrix(&self) -> [[f64; 2]; 2] {
        let it = &self.inverse_transpose;
        [[it[0][0], it[1][0]], [it[0][1], it[1][1]]]
    }
}

impl Mesh {
    /// Builds topology from vertices and triangles; triangle vertices are
    /// sorted on input.
    pub fn from_elements(vertices: Vec<[f64; 2]>, elements: Vec<[usize; 3]>) -> Result<Self> {
        let mut elements = elements;
        for e in elements.iter_mut() {
            e.sort_unstable();
            if e.iter().any(|&v| v >= vertices.len()) {
                return Err(HdgError::MeshFormat(format!("element {e:?} references a missing vertex")));
            }
            if e[0] == e[1] || e[1] == e[2] {
                return Err(HdgError::MeshFormat(format!("degenerate element {e:?}")));
            }
        }
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut element_facets = vec![[0usize; 3]; elements.len()];
        for (t, e) in elements.iter().enumerate() {
            for (lf, pair) in LOCAL_FACETS.iter().enumerate() {
                let key = [e[pair[0]], e[pair[1]]];
                if let Some(&f) = index.get(&key) {
                    let facet = &mut facets[f];
                    if facet.right.is_some() {
                        return Err(HdgError::MeshFormat(format!("facet {key:?} shared by more than two elements")));
                    }
                    facet.right = Some(t);
                    facet.local_right = Some(lf);
                    element_facets[t][lf] = f;
                } else {
                    let a = vertices[key[0]];
                    let b = vertices[key[1]];
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let length = d[0].hypot(d[1]);
                    let tangent = [d[0] / length, d[1] / length];
                    let mut normal = [tangent[1], -tangent[0]];
                    let opp = vertices[e[3 - pair[0] - pair[1]]];
                    if (opp[0] - a[0]) * normal[0] + (opp[1] - a[1]) * normal[1] > 0.0 {
                        normal = [-normal[0], -normal[1]];
                    }
                    index.insert(key, facets.len());
                    element_facets[t][lf] = facets.len();
                    facets.push(Facet {
                        vertices: key,
                        left: t,
                        local_left: lf,
                        right: None,
                        local_right: None,
                        normal,
                        tangent,
                        length,
                    });
                }
            }
        }
        let h = elements
            .iter()
            .map(|e| {
                LOCAL_FACETS
                    .iter()
                    .map(|p| {
                        let a = vertices[e[p[0]]];
                        let b = vertices[e[p[1]]];
                        (b[0] - a[0]).hypot(b[1] - a[1])
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let mesh = Self { vertices, elements, facets, element_facets, h };
        for t in 0..mesh.elements.len() {
            mesh.element_map(t)?;
        }
        Ok(mesh)
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_interior_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    /// Largest element diameter.
    pub fn max_h(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    pub fn element_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        self.elements[t].map(|v| self.vertices[v])
    }

    pub fn element_map(&self, t: usize) -> Result<AffineMap> {
        if t >= self.elements.len() {
            return Err(HdgError::IndexOutOfRange { index: t, len: self.elements.len() });
        }
        AffineMap::from_vertices(self.element_vertices(t))
    }

    pub fn element_area(&self, t: usize) -> f64 {
        let p = self.element_vertices(t);
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs()
    }

    /// Outward unit normal of element `t` on its local facet `lf`.
    pub fn outward_normal(&self, t: usize, lf: usize) -> [f64; 2] {
        let f = &self.facets[self.element_facets[t][lf]];
        if f.left == t {
            f.normal
        } else {
            [-f.normal[0], -f.normal[1]]
        }
    }

    /// Uniform red refinement: each triangle splits into four.
    pub fn refine(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut mids: HashMap<[usize; 2], usize> = HashMap::new();
        for f in &self.facets {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            mids.insert(f.vertices, vertices.len());
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for e in &self.elements {
            let m01 = mids[&[e[0], e[1]]];
            let m12 = mids[&[e[1], e[2]]];
            let m02 = mids[&[e[0], e[2]]];
            elements.push([e[0], m01, m02]);
            elements.push([e[1], m01, m12]);
            elements.push([e[2], m02, m12]);
            elements.push([m01, m12, m02]);
        }
        Mesh::from_elements(vertices, elements).expect("refinement of a valid mesh is valid")
    }

    /// `refine` applied `levels` times.
    pub fn refined(&self, levels: usize) -> Mesh {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.refine();
        }
        m
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "2 {} {}", self.vertices.len(), self.elements.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for e in &self.elements {
            let _ = writeln!(s, "{} {} {}", e[0], e[1], e[2]);
        }
        s
    }

    pub fn load(text: &str) -> Result<Mesh> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| tokens.next().ok_or_else(|| HdgError::MeshFormat(format!("missing {what}")));
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| HdgError::MeshFormat(format!("{s}: {e}")));
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| HdgError::MeshFormat(format!("{s}: {e}")));
        let dim = parse_usize(next("dimension")?)?;
        if dim != 2 {
            return Err(HdgError::UnsupportedDimension(dim));
        }
        let nv = parse_usize(next("vertex count")?)?;
        let ne = parse_usize(next("element count")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push([parse_f64(next("coordinate")?)?, parse_f64(next("coordinate")?)?]);
        }
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            elements.push([
                parse_usize(next("vertex index")?)?,
                parse_usize(next("vertex index")?)?,
                parse_usize(next("vertex index")?)?,
            ]);
        }
        Mesh::from_elements(vertices, elements)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        Mesh::load(&std::fs::read_to_string(path)?)
    }
}

/// `n × n` squares of the unit square, each cut along its rising diagonal.
///
/// `n = 0` is treated as `n = 1`.
pub fn unit_square_mesh(n_subdiv: usize) -> Mesh {
    let n = n_subdiv.max(1);
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            elements.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            elements.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    Mesh::from_elements(vertices, elements).expect("structured mesh is valid")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn check_invariants(m: &Mesh) {
        let area: f64 = (0..m.n_elements()).map(|t| m.element_area(t)).sum();
        assert!((area - 1.0).abs() < 1e-14, "area {area}");
        let mut uses = vec![0usize; m.facets.len()];
        for (t, ef) in m.element_facets.iter().enumerate() {
            assert!(m.element_area(t) > 0.0);
            for &f in ef {
                uses[f] += 1;
            }
        }
        for (f, facet) in m.facets.iter().enumerate() {
            assert_eq!(uses[f], if facet.is_boundary() { 1 } else { 2 });
            assert!(facet.right.is_none_or(|r| r > facet.left));
            let mid = facet.point(m, 0.0);
            // normal points away from the left centroid and towards the right one
            let centroid = |t: usize| {
                let p = m.element_vertices(t);
                [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
            };
            let dot = |c: [f64; 2]| (mid[0] - c[0]) * facet.normal[0] + (mid[1] - c[1]) * facet.normal[1];
            assert!(dot(centroid(facet.left)) > 0.0);
            if let Some(r) = facet.right {
                assert!(dot(centroid(r)) < 0.0);
                let lr = facet.local_right.unwrap();
                let nr = m.outward_normal(r, lr);
                assert!((nr[0] + facet.normal[0]).abs() < 1e-15 && (nr[1] + facet.normal[1]).abs() < 1e-15);
            } else {
                // boundary facets lie on ∂Ω with outward normal
                let on_side = |c: f64| c.abs() < 1e-14 || (c - 1.0).abs() < 1e-14;
                let a = m.vertices[facet.vertices[0]];
                let b = m.vertices[facet.vertices[1]];
                let vertical = (a[0] - b[0]).abs() < 1e-14 && on_side(a[0]);
                let horizontal = (a[1] - b[1]).abs() < 1e-14 && on_side(a[1]);
                assert!(vertical || horizontal);
                let out = [mid[0] - 0.5, mid[1] - 0.5];
                assert!(out[0] * facet.normal[0] + out[1] * facet.normal[1] > 0.0);
            }
        }
        let boundary: f64 = m.facets.iter().filter(|f| f.is_boundary()).map(|f| f.length).sum();
        assert!((boundary - 4.0).abs() < 1e-13);
    }

    #[test]
    fn small_meshes() {
        let m = unit_square_mesh(1);
        assert_eq!((m.vertices.len(), m.n_elements(), m.facets.len(), m.n_interior_facets()), (4, 2, 5, 1));
        let m = unit_square_mesh(2);
        assert_eq!((m.vertices.len(), m.n_elements(), m.facets.len(), m.n_interior_facets()), (9, 8, 16, 8));
        for n in 1..6 {
            check_invariants(&unit_square_mesh(n));
        }
    }

    #[test]
    fn refinement() {
        let m = unit_square_mesh(1);
        let r1 = m.refine();
        assert_eq!(r1.n_elements(), 8);
        let r2 = r1.refine();
        assert_eq!(r2.n_elements(), 32);
        check_invariants(&r1);
        check_invariants(&r2);
        assert!((r2.max_h() - m.max_h() / 4.0).abs() < 1e-14);
        check_invariants(&unit_square_mesh(3).refined(2));
    }

    #[test]
    fn affine_maps() {
        let id = AffineMap::from_vertices([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(id.det, 1.0);
        let m = unit_square_mesh(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for t in 0..m.n_elements() {
            let map = m.element_map(t).unwrap();
            assert!((map.det.abs() - m.element_area(t)).abs() < 1e-15);
            for _ in 0..10 {
                let p = [rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)];
                let q = map.inverse(map.apply(p));
                assert!((q[0] - p[0]).abs() < 1e-13 && (q[1] - p[1]).abs() < 1e-13);
            }
            for (i, v) in [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
                let x = map.apply(*v);
                let y = m.vertices[m.elements[t][i]];
                assert!((x[0] - y[0]).abs() < 1e-15 && (x[1] - y[1]).abs() < 1e-15);
            }
        }
        assert!(matches!(m.element_map(99), Err(HdgError::IndexOutOfRange { .. })));
        assert!(matches!(AffineMap::from_vertices([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), Err(HdgError::SingularJacobian(_))));
    }

    #[test]
    fn dump_and_load_round_trip() {
        let m = unit_square_mesh(2).refine();
        assert_eq!(Mesh::load(&m.dump()).unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        m.save(&path).unwrap();
        assert_eq!(Mesh::read(&path).unwrap(), m);
        assert!(matches!(Mesh::load("3 0 0"), Err(HdgError::UnsupportedDimension(3))));
        assert!(matches!(Mesh::load("2 3 1\n0 0\n1 0"), Err(HdgError::MeshFormat(_))));
    }

    proptest::proptest! {
        #[test]
        fn refined_meshes_keep_invariants(n in 1usize..5, levels in 0usize..3) {
            check_invariants(&unit_square_mesh(n).refined(levels));
        }
    }
}
