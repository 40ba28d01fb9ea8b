//! Hierarchical H(div) bases on the reference triangle and tetrahedron.
//!
//! Every function is a closed-form expression in the barycentric
//! coordinates, evaluated through derivative jets so curls and divergences
//! are exact. Scaled Jacobi factors are evaluated in homogeneous form, so
//! nothing is divided by a vanishing barycentric sum.
//!
//! Ordering contract: the RT0 block, then one block per local facet in
//! ascending hierarchical order, then the cell blocks.

use crate::error::{HdgError, Result};
use crate::jet::{cross3, curl2, curl3, vj_div, Jet1, Jet2, VecJet};
use crate::polyquad::{facet_quadrature, legendre_all, scaled_integrated_jacobi_all, simplex_quadrature};

const INSIDE_TOL: f64 = 1e-12;

pub const REF_VERTICES_2D: [[f64; 2]; 3] = [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
pub const REF_VERTICES_3D: [[f64; 3]; 4] = [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Local edges of the triangle (local vertices, ascending).
pub const FACETS_2D: [[usize; 2]; 3] = [[0, 1], [1, 2], [0, 2]];
/// Local faces of the tetrahedron (local vertices, ascending).
pub const FACETS_3D: [[usize; 3]; 4] = [[0, 1, 2], [0, 2, 3], [0, 1, 3], [1, 2, 3]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum ShapeKind {
    RT0,
    FacetHigh,
    CellDivFree,
    CellDiv,
}

/// Closed-form recipe of one shape function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Rt0Tri { e: [usize; 2] },
    EdgeTri { f: [usize; 2], i: usize },
    CellTriA { i: usize, j: usize },
    CellTriB { l: usize },
    CellTriC { i: usize, j: usize },
    Rt0Tet { f: [usize; 3] },
    FaceTet0 { f: [usize; 3], l: usize },
    FaceTet { f: [usize; 3], i: usize, j: usize },
    CellTetA { j: usize, l: usize },
    CellTetB { i: usize, j: usize, l: usize },
    CellTetC { i: usize, j: usize, l: usize },
    CellTetD { l: usize },
    CellTetE { j: usize, l: usize },
    CellTetF { i: usize, j: usize, l: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    pub kind: ShapeKind,
    pub facet_id: Option<usize>,
    /// Hierarchical order: normal-trace degree for facet functions.
    pub order: usize,
    pub order_indices: Vec<usize>,
    pub family: Family,
    /// 2D facet functions only: `φ·n̂_out = trace_scale · P_order(s)` with
    /// `s ∈ [-1,1]` running from the lower to the higher local vertex.
    pub trace_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBasis {
    pub dim: usize,
    pub k: usize,
    pub functions: Vec<ShapeFunction>,
    /// Per local facet, function indices in ascending order (RT0 first).
    pub facet_blocks: Vec<Vec<usize>>,
}

fn lambdas2(p: [f64; 2]) -> [Jet2<2>; 3] {
    let [x, y] = p;
    [
        Jet2::affine(0.5 * (1.0 - x - y), [-0.5, -0.5]),
        Jet2::affine(0.5 * (1.0 + x - y), [0.5, -0.5]),
        Jet2::affine(y, [0.0, 1.0]),
    ]
}

fn lambdas3(p: [f64; 3]) -> [Jet2<3>; 4] {
    let [x, y, z] = p;
    [
        Jet2::affine(0.5 * (1.0 - x - y - z), [-0.5, -0.5, -0.5]),
        Jet2::affine(0.5 * (1.0 + x - y - z), [0.5, -0.5, -0.5]),
        Jet2::affine(y, [0.0, 1.0, 0.0]),
        Jet2::affine(z, [0.0, 0.0, 1.0]),
    ]
}

fn jet_vec3(a: [f64; 3]) -> VecJet<3> {
    a.map(Jet1::constant)
}

/// `∇λ_a λ_b − λ_a ∇λ_b` with second-order components.
fn nedelec0(l: &[Jet2<3>; 4], a: usize, b: usize) -> [Jet2<3>; 3] {
    std::array::from_fn(|c| l[b] * l[a].g[c] - l[a] * l[b].g[c])
}

fn scale_vec3(v: [Jet2<3>; 3], s: Jet2<3>) -> [Jet2<3>; 3] {
    v.map(|c| c * s)
}

fn grad1<const D: usize>(s: &Jet2<D>) -> VecJet<D> {
    s.grad()
}

impl Family {
    fn eval2(&self, p: [f64; 2]) -> VecJet<2> {
        let l = lambdas2(p);
        let curl_l = |a: usize| -> VecJet<2> { curl2(&l[a]) };
        let rt0 = |a: usize, b: usize| -> VecJet<2> {
            let ca = curl_l(a);
            let cb = curl_l(b);
            let la = l[a].to_jet1();
            let lb = l[b].to_jet1();
            [ca[0] * lb - la * cb[0], ca[1] * lb - la * cb[1]]
        };
        let u = |i: usize| scaled_integrated_jacobi_all(i, 0, l[1] - l[0], l[1] + l[0])[i];
        let v = |i: usize, j: usize| {
            let t = l[2] * 2.0 - Jet2::constant(1.0);
            scaled_integrated_jacobi_all(j, 2 * i - 1, t, Jet2::constant(1.0))[j]
        };
        match *self {
            Family::Rt0Tri { e } => rt0(e[0], e[1]),
            Family::EdgeTri { f, i } => {
                let psi = scaled_integrated_jacobi_all(i + 1, 0, l[f[1]] - l[f[0]], l[f[1]] + l[f[0]])[i + 1];
                curl2(&psi)
            }
            Family::CellTriA { i, j } => curl2(&(u(i) * v(i, j))),
            Family::CellTriB { l: ll } => {
                let t = l[2] * 2.0 - Jet2::constant(1.0);
                let s = scaled_integrated_jacobi_all(ll, 3, t, Jet2::constant(1.0))[ll].to_jet1();
                rt0(0, 1).map(|c| c * s * 2.0)
            }
            Family::CellTriC { i, j } => {
                let cu = curl2(&u(i));
                let s = v(i, j).to_jet1();
                cu.map(|c| c * s)
            }
            _ => unreachable!("3D family evaluated in 2D"),
        }
    }

    fn eval3(&self, p: [f64; 3]) -> VecJet<3> {
        let l = lambdas3(p);
        let one = Jet2::<3>::constant(1.0);
        let gl = |a: usize| -> VecJet<3> { jet_vec3(l[a].g) };
        let rt0 = |f: [usize; 3]| -> VecJet<3> {
            let term = |a: usize, b: usize, c: usize| -> VecJet<3> {
                let cr = cross3(&gl(b), &gl(c));
                let s = l[a].to_jet1();
                cr.map(|x| x * s)
            };
            let t1 = term(f[0], f[1], f[2]);
            let t2 = term(f[1], f[2], f[0]);
            let t3 = term(f[2], f[0], f[1]);
            std::array::from_fn(|c| t1[c] + t2[c] + t3[c])
        };
        // cell polynomials
        let u = |i: usize| scaled_integrated_jacobi_all(i, 0, l[1] - l[0], l[1] + l[0])[i];
        let v = |i: usize, j: usize| {
            scaled_integrated_jacobi_all(j, 2 * i - 1, l[2] * 2.0 - one + l[3], one - l[3])[j]
        };
        let w = |i: usize, j: usize, ll: usize| {
            scaled_integrated_jacobi_all(ll, 2 * i + 2 * j - 2, l[3] * 2.0 - one, one)[ll]
        };
        // face polynomials
        let uf = |f: [usize; 3], i: usize| scaled_integrated_jacobi_all(i, 0, l[f[1]] - l[f[0]], l[f[1]] + l[f[0]])[i];
        let vf = |f: [usize; 3], i: usize, j: usize| {
            scaled_integrated_jacobi_all(j, 2 * i - 1, l[f[2]] - l[f[1]] - l[f[0]], l[f[2]] + l[f[1]] + l[f[0]])[j]
        };
        match *self {
            Family::Rt0Tet { f } => rt0(f),
            Family::FaceTet0 { f, l: ll } => curl3(&scale_vec3(nedelec0(&l, f[0], f[1]), vf(f, 2, ll))),
            Family::FaceTet { f, i, j } => {
                let a = grad1(&uf(f, i + 1));
                let b = grad1(&vf(f, i + 1, j + 1));
                cross3(&a, &b).map(|c| -c)
            }
            Family::CellTetA { j, l: ll } => curl3(&scale_vec3(nedelec0(&l, 0, 1), v(2, j) * w(2, j, ll))),
            Family::CellTetB { i, j, l: ll } => cross3(&grad1(&(v(i, j) * w(i, j, ll))), &grad1(&u(i))),
            Family::CellTetC { i, j, l: ll } => cross3(&grad1(&w(i, j, ll)), &grad1(&(u(i) * v(i, j)))),
            Family::CellTetD { l: ll } => {
                let s = w(2, 1, ll).to_jet1();
                rt0([0, 1, 2]).map(|c| c * s * 4.0)
            }
            Family::CellTetE { j, l: ll } => {
                let n0: VecJet<3> = nedelec0(&l, 0, 1).map(|c| c.to_jet1());
                let s = v(2, j).to_jet1();
                cross3(&n0, &grad1(&w(2, j, ll))).map(|c| c * s * 2.0)
            }
            Family::CellTetF { i, j, l: ll } => {
                let s = w(i, j, ll).to_jet1();
                cross3(&grad1(&u(i)), &grad1(&v(i, j))).map(|c| c * s)
            }
            _ => unreachable!("2D family evaluated in 3D"),
        }
    }
}

/// `∫` of `f` along the reference edge between two reference vertices,
/// parameterized by `s ∈ [-1, 1]`; includes the length factor.
fn edge_points(f: [usize; 2], s: f64) -> [f64; 2] {
    let a = REF_VERTICES_2D[f[0]];
    let b = REF_VERTICES_2D[f[1]];
    let t = 0.5 * (1.0 + s);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Outward unit normal of a reference triangle edge.
pub fn ref_normal_2d(facet: usize) -> [f64; 2] {
    let f = FACETS_2D[facet];
    let a = REF_VERTICES_2D[f[0]];
    let b = REF_VERTICES_2D[f[1]];
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let mut n = [d[1] / len, -d[0] / len];
    let opp = REF_VERTICES_2D[3 - f[0] - f[1]];
    if (opp[0] - a[0]) * n[0] + (opp[1] - a[1]) * n[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

pub fn ref_edge_length(facet: usize) -> f64 {
    let f = FACETS_2D[facet];
    let a = REF_VERTICES_2D[f[0]];
    let b = REF_VERTICES_2D[f[1]];
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Outward unit normal and area of a reference tetrahedron face.
pub fn ref_face_3d(facet: usize) -> ([f64; 3], f64) {
    let f = FACETS_3D[facet];
    let [a, b, c] = f.map(|v| REF_VERTICES_3D[v]);
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cr = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
    let norm = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
    let mut n = cr.map(|x| x / norm);
    let opp = REF_VERTICES_3D[6 - f[0] - f[1] - f[2]];
    if (0..3).map(|i| (opp[i] - a[i]) * n[i]).sum::<f64>() > 0.0 {
        n = n.map(|x| -x);
    }
    (n, 0.5 * norm)
}

/// Point on a reference face from reference-triangle coordinates.
fn face_point(facet: usize, q: [f64; 2]) -> [f64; 3] {
    let f = FACETS_3D[facet];
    let lam = [0.5 * (1.0 - q[0] - q[1]), 0.5 * (1.0 + q[0] - q[1]), q[1]];
    std::array::from_fn(|c| (0..3).map(|v| lam[v] * REF_VERTICES_3D[f[v]][c]).sum())
}

fn inside_2d(p: [f64; 2]) -> bool {
    let [x, y] = p;
    y >= -INSIDE_TOL && 0.5 * (1.0 - x - y) >= -INSIDE_TOL && 0.5 * (1.0 + x - y) >= -INSIDE_TOL
}

fn inside_3d(p: [f64; 3]) -> bool {
    let [x, y, z] = p;
    y >= -INSIDE_TOL
        && z >= -INSIDE_TOL
        && 0.5 * (1.0 - x - y - z) >= -INSIDE_TOL
        && 0.5 * (1.0 + x - y - z) >= -INSIDE_TOL
}

impl ReferenceBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Values with Jacobians at a 2D reference point (no inside check).
    pub fn tabulate_2d(&self, p: [f64; 2]) -> Vec<VecJet<2>> {
        self.functions.iter().map(|f| f.family.eval2(p)).collect()
    }

    /// Values with Jacobians at a 3D reference point (no inside check).
    pub fn tabulate_3d(&self, p: [f64; 3]) -> Vec<VecJet<3>> {
        self.functions.iter().map(|f| f.family.eval3(p)).collect()
    }

    /// Indices of functions whose kind is one of `kinds`.
    pub fn indices_of(&self, kinds: &[ShapeKind]) -> Vec<usize> {
        (0..self.len()).filter(|&i| kinds.contains(&self.functions[i].kind)).collect()
    }
}

/// Builds the reference basis of order `k` in dimension `dim`.
pub fn build_reference_basis(dim: usize, k: usize) -> Result<ReferenceBasis> {
    if k < 1 {
        return Err(HdgError::InvalidOrder(k));
    }
    match dim {
        2 => Ok(build_2d(k)),
        3 => Ok(build_3d(k)),
        d => Err(HdgError::UnsupportedDimension(d)),
    }
}

fn facet_fn(kind: ShapeKind, facet: usize, order: usize, idx: Vec<usize>, family: Family) -> ShapeFunction {
    ShapeFunction { kind, facet_id: Some(facet), order, order_indices: idx, family, trace_scale: 0.0 }
}

fn cell_fn(kind: ShapeKind, order: usize, idx: Vec<usize>, family: Family) -> ShapeFunction {
    ShapeFunction { kind, facet_id: None, order, order_indices: idx, family, trace_scale: 0.0 }
}

fn build_2d(k: usize) -> ReferenceBasis {
    let mut functions = Vec::new();
    let mut facet_blocks = vec![Vec::new(); 3];
    for (lf, e) in FACETS_2D.iter().enumerate() {
        facet_blocks[lf].push(functions.len());
        functions.push(facet_fn(ShapeKind::RT0, lf, 0, vec![0], Family::Rt0Tri { e: *e }));
    }
    for (lf, f) in FACETS_2D.iter().enumerate() {
        for i in 1..=k {
            facet_blocks[lf].push(functions.len());
            functions.push(facet_fn(ShapeKind::FacetHigh, lf, i, vec![i], Family::EdgeTri { f: *f, i }));
        }
    }
    for i in 2..=k {
        for j in 1..=(k + 1 - i) {
            functions.push(cell_fn(ShapeKind::CellDivFree, i + j - 1, vec![i, j], Family::CellTriA { i, j }));
        }
    }
    for l in 1..k {
        functions.push(cell_fn(ShapeKind::CellDiv, l, vec![1, l], Family::CellTriB { l }));
    }
    for i in 2..=k {
        for j in 1..=(k + 1 - i) {
            functions.push(cell_fn(ShapeKind::CellDiv, i + j - 1, vec![i, j], Family::CellTriC { i, j }));
        }
    }
    let mut basis = ReferenceBasis { dim: 2, k, functions, facet_blocks };
    // trace scale by projection of the normal trace onto P_order
    let rule = facet_quadrature::<1>(2 * k + 2).expect("1D facet rule");
    for lf in 0..3 {
        let n = ref_normal_2d(lf);
        for &fi in &basis.facet_blocks[lf].clone() {
            let sf = &basis.functions[fi];
            let (mut num, mut den) = (0.0, 0.0);
            for (s, w) in rule.iter() {
                let v = sf.family.eval2(edge_points(FACETS_2D[lf], s[0]));
                let tr = v[0].v * n[0] + v[1].v * n[1];
                let pi = legendre_all(sf.order, s[0])[sf.order];
                num += w * tr * pi;
                den += w * pi * pi;
            }
            basis.functions[fi].trace_scale = num / den;
        }
    }
    basis
}

fn build_3d(k: usize) -> ReferenceBasis {
    let mut functions = Vec::new();
    let mut facet_blocks = vec![Vec::new(); 4];
    for (lf, f) in FACETS_3D.iter().enumerate() {
        facet_blocks[lf].push(functions.len());
        functions.push(facet_fn(ShapeKind::RT0, lf, 0, vec![0, 0], Family::Rt0Tet { f: *f }));
    }
    for (lf, f) in FACETS_3D.iter().enumerate() {
        // ascending order: all functions with hierarchical order o, o = 1..k
        for o in 1..=k {
            facet_blocks[lf].push(functions.len());
            functions.push(facet_fn(ShapeKind::FacetHigh, lf, o, vec![0, o], Family::FaceTet0 { f: *f, l: o }));
            for i in 1..=o {
                let j = o - i;
                facet_blocks[lf].push(functions.len());
                functions.push(facet_fn(ShapeKind::FacetHigh, lf, o, vec![i, j], Family::FaceTet { f: *f, i, j }));
            }
        }
    }
    for j in 1..=k {
        for l in 1..=k.saturating_sub(j) {
            functions.push(cell_fn(ShapeKind::CellDivFree, j + l, vec![1, j, l], Family::CellTetA { j, l }));
        }
    }
    for i in 2..=k {
        for j in 1..=k {
            for l in 1..=k {
                if i + j + l <= k + 2 {
                    functions.push(cell_fn(ShapeKind::CellDivFree, i + j + l - 2, vec![i, j, l], Family::CellTetB { i, j, l }));
                }
            }
        }
    }
    for i in 2..=k {
        for j in 1..=k {
            for l in 1..=k {
                if i + j + l <= k + 2 {
                    functions.push(cell_fn(ShapeKind::CellDivFree, i + j + l - 2, vec![i, j, l], Family::CellTetC { i, j, l }));
                }
            }
        }
    }
    for l in 1..k {
        functions.push(cell_fn(ShapeKind::CellDiv, l, vec![1, 0, l], Family::CellTetD { l }));
    }
    for j in 1..=k {
        for l in 1..=k.saturating_sub(j) {
            functions.push(cell_fn(ShapeKind::CellDiv, j + l, vec![1, j, l], Family::CellTetE { j, l }));
        }
    }
    for i in 2..=k {
        for j in 1..=k {
            for l in 1..=k {
                if i + j + l <= k + 2 {
                    functions.push(cell_fn(ShapeKind::CellDiv, i + j + l - 2, vec![i, j, l], Family::CellTetF { i, j, l }));
                }
            }
        }
    }
    ReferenceBasis { dim: 3, k, functions, facet_blocks }
}

/// Values and divergences of all functions at a reference point.
pub fn eval_basis(basis: &ReferenceBasis, point: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
    if point.len() != basis.dim {
        return Err(HdgError::OutsideElement(point.to_vec()));
    }
    match basis.dim {
        2 => {
            let p = [point[0], point[1]];
            if !inside_2d(p) {
                return Err(HdgError::OutsideElement(point.to_vec()));
            }
            Ok(basis.tabulate_2d(p).iter().map(|v| (v.map(|c| c.v).to_vec(), vj_div(v))).collect())
        }
        _ => {
            let p = [point[0], point[1], point[2]];
            if !inside_3d(p) {
                return Err(HdgError::OutsideElement(point.to_vec()));
            }
            Ok(basis.tabulate_3d(p).iter().map(|v| (v.map(|c| c.v).to_vec(), vj_div(v))).collect())
        }
    }
}

/// Normal traces of the facet block of `facet` at the facet quadrature
/// points, with the quadrature weights (facet measure included).
fn facet_traces(basis: &ReferenceBasis, facet: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let block = &basis.facet_blocks[facet];
    let deg = 2 * basis.k + 2;
    if basis.dim == 2 {
        let rule = facet_quadrature::<1>(deg).expect("1D facet rule");
        let n = ref_normal_2d(facet);
        let jac = 0.5 * ref_edge_length(facet);
        let traces = block
            .iter()
            .map(|&fi| {
                rule.points
                    .iter()
                    .map(|s| {
                        let v = basis.functions[fi].family.eval2(edge_points(FACETS_2D[facet], s[0]));
                        v[0].v * n[0] + v[1].v * n[1]
                    })
                    .collect()
            })
            .collect();
        (traces, rule.weights.iter().map(|w| w * jac).collect())
    } else {
        let rule = facet_quadrature::<2>(deg).expect("2D facet rule");
        let (n, area) = ref_face_3d(facet);
        let traces = block
            .iter()
            .map(|&fi| {
                rule.points
                    .iter()
                    .map(|q| {
                        let v = basis.functions[fi].family.eval3(face_point(facet, *q));
                        v[0].v * n[0] + v[1].v * n[1] + v[2].v * n[2]
                    })
                    .collect()
            })
            .collect();
        (traces, rule.weights.iter().map(|w| w * area).collect())
    }
}

/// Gram matrix of the normal traces of the facet block on `facet`.
pub fn facet_trace_gram(basis: &ReferenceBasis, facet: usize) -> Vec<Vec<f64>> {
    let (tr, w) = facet_traces(basis, facet);
    tr.iter()
        .map(|a| tr.iter().map(|b| a.iter().zip(b).zip(&w).map(|((x, y), w)| x * y * w).sum()).collect())
        .collect()
}

/// Largest off-diagonal entry of the facet normal-trace Gram matrix
/// relative to its largest diagonal entry.
pub fn check_normal_orthogonality(basis: &ReferenceBasis, facet: usize) -> f64 {
    let g = facet_trace_gram(basis, facet);
    let diag = (0..g.len()).map(|i| g[i][i]).fold(0.0, f64::max);
    let mut off: f64 = 0.0;
    for i in 0..g.len() {
        for j in 0..g.len() {
            if i != j {
                off = off.max(g[i][j].abs());
            }
        }
    }
    off / diag
}

/// Monomial exponents of total degree `<= deg` in `dim` variables.
pub fn monomial_exponents(dim: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if dim == 2 {
        for a in 0..=deg {
            for b in 0..=(deg - a) {
                out.push(vec![a, b]);
            }
        }
    } else {
        for a in 0..=deg {
            for b in 0..=(deg - a) {
                for c in 0..=(deg - a - b) {
                    out.push(vec![a, b, c]);
                }
            }
        }
    }
    out
}

fn monomial(p: &[f64], e: &[usize]) -> f64 {
    p.iter().zip(e).map(|(x, &n)| x.powi(n as i32)).product()
}

/// Highest-order facet functions tested for volume orthogonality.
pub fn highest_order_facet_functions(basis: &ReferenceBasis) -> Vec<usize> {
    basis
        .functions
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            f.kind == ShapeKind::FacetHigh
                && f.order == basis.k
                && !matches!(f.family, Family::FaceTet0 { .. })
        })
        .map(|(i, _)| i)
        .collect()
}

/// `max |(φ, q)_T̂|` over highest-order facet functions `φ` and monomial
/// vector fields `q` of degree `<= k-2`; 0 for `k = 1`.
pub fn check_highest_order_volume_orthogonality(basis: &ReferenceBasis) -> f64 {
    check_volume_orthogonality_of(basis, &highest_order_facet_functions(basis))
}

/// Same measure as [`check_highest_order_volume_orthogonality`] for an
/// arbitrary set of functions.
pub fn check_volume_orthogonality_of(basis: &ReferenceBasis, functions: &[usize]) -> f64 {
    let k = basis.k;
    if k < 2 {
        return 0.0;
    }
    let exps = monomial_exponents(basis.dim, k - 2);
    let deg = 2 * k;
    let mut worst: f64 = 0.0;
    if basis.dim == 2 {
        let rule = simplex_quadrature::<2>(deg).expect("triangle rule");
        let mut acc = vec![vec![[0.0; 2]; exps.len()]; functions.len()];
        for (p, w) in rule.iter() {
            for (a, &fi) in functions.iter().enumerate() {
                let v = basis.functions[fi].family.eval2(*p);
                for (m, e) in exps.iter().enumerate() {
                    let q = monomial(p, e) * w;
                    acc[a][m][0] += v[0].v * q;
                    acc[a][m][1] += v[1].v * q;
                }
            }
        }
        for r in acc.iter().flatten() {
            worst = worst.max(r[0].abs()).max(r[1].abs());
        }
    } else {
        let rule = simplex_quadrature::<3>(deg).expect("tet rule");
        let mut acc = vec![vec![[0.0; 3]; exps.len()]; functions.len()];
        for (p, w) in rule.iter() {
            for (a, &fi) in functions.iter().enumerate() {
                let v = basis.functions[fi].family.eval3(*p);
                for (m, e) in exps.iter().enumerate() {
                    let q = monomial(p, e) * w;
                    for c in 0..3 {
                        acc[a][m][c] += v[c].v * q;
                    }
                }
            }
        }
        for r in acc.iter().flatten() {
            worst = worst.max(r[0].abs()).max(r[1].abs()).max(r[2].abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    fn random_points_2d(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| loop {
                let p = [rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)];
                if inside_2d(p) && p[1] > 1e-3 && p[1] + p[0].abs() < 0.999 {
                    break p;
                }
            })
            .collect()
    }

    fn random_points_3d(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| loop {
                let p = [rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
                if inside_3d(p) && p[1] > 1e-3 && p[2] > 1e-3 && p[0].abs() + p[1] + p[2] < 0.999 {
                    break p;
                }
            })
            .collect()
    }

    #[test]
    fn counts_2d() {
        for k in 1..=6 {
            let b = build_reference_basis(2, k).unwrap();
            assert_eq!(b.len(), (k + 1) * (k + 2));
            for blk in &b.facet_blocks {
                let orders: Vec<usize> = blk.iter().map(|&i| b.functions[i].order).collect();
                assert_eq!(orders, (0..=k).collect::<Vec<_>>());
            }
        }
        let b = build_reference_basis(2, 2).unwrap();
        let count = |kind| b.functions.iter().filter(|f| f.kind == kind).count();
        assert_eq!(count(ShapeKind::RT0), 3);
        assert_eq!(count(ShapeKind::FacetHigh), 6);
        assert_eq!(count(ShapeKind::CellDivFree), 1);
        assert_eq!(count(ShapeKind::CellDiv), 2);
        let b = build_reference_basis(2, 1).unwrap();
        assert_eq!(b.len(), 6);
        assert!(b.functions.iter().all(|f| f.facet_id.is_some()));
        assert_eq!(build_reference_basis(2, 0).unwrap_err(), HdgError::InvalidOrder(0));
        assert_eq!(build_reference_basis(4, 2).unwrap_err(), HdgError::UnsupportedDimension(4));
    }

    #[test]
    fn counts_3d() {
        for k in 1..=4 {
            let b = build_reference_basis(3, k).unwrap();
            assert_eq!(b.len(), (k + 1) * (k + 2) * (k + 3) / 2, "k={k}");
            for blk in &b.facet_blocks {
                assert_eq!(blk.len(), (k + 1) * (k + 2) / 2);
            }
        }
    }

    #[test]
    fn ordering_contract() {
        let b = build_reference_basis(2, 3).unwrap();
        let kinds: Vec<ShapeKind> = b.functions.iter().map(|f| f.kind).collect();
        let first_cell = kinds.iter().position(|k| matches!(k, ShapeKind::CellDiv | ShapeKind::CellDivFree)).unwrap();
        assert!(kinds[..3].iter().all(|k| *k == ShapeKind::RT0));
        assert!(kinds[3..first_cell].iter().all(|k| *k == ShapeKind::FacetHigh));
        assert!(kinds[first_cell..].iter().all(|k| matches!(k, ShapeKind::CellDiv | ShapeKind::CellDivFree)));
    }

    #[test]
    fn lower_edge_traces() {
        let k = 5;
        let b = build_reference_basis(2, k).unwrap();
        let n = ref_normal_2d(0);
        for &x in &[-0.8, -0.3, 0.1, 0.6] {
            let vals = b.tabulate_2d([x, 0.0]);
            let leg = legendre_all(k, x);
            let rt = vals[b.facet_blocks[0][0]];
            let rt_trace = rt[0].v * n[0] + rt[1].v * n[1];
            assert!((rt_trace - b.functions[b.facet_blocks[0][0]].trace_scale).abs() < 1e-14);
            for (pos, &fi) in b.facet_blocks[0].iter().enumerate().skip(1) {
                let v = vals[fi];
                let tr = v[0].v * n[0] + v[1].v * n[1];
                assert!((tr - leg[pos]).abs() < 1e-13, "i={pos}");
            }
        }
        for &fi in &b.facet_blocks[0][1..] {
            assert!((b.functions[fi].trace_scale - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn curls_are_divergence_free() {
        for k in 1..=5 {
            let b = build_reference_basis(2, k).unwrap();
            for p in random_points_2d(15, k as u64) {
                for (v, f) in b.tabulate_2d(p).iter().zip(&b.functions) {
                    if matches!(f.kind, ShapeKind::FacetHigh | ShapeKind::CellDivFree) {
                        assert!(vj_div(v).abs() < 1e-12);
                    }
                }
            }
            let b = build_reference_basis(3, k.min(4)).unwrap();
            for p in random_points_3d(15, k as u64) {
                for (v, f) in b.tabulate_3d(p).iter().zip(&b.functions) {
                    if matches!(f.kind, ShapeKind::FacetHigh | ShapeKind::CellDivFree) {
                        assert!(vj_div(v).abs() < 1e-11, "{:?} {}", f.family, vj_div(v));
                    }
                }
            }
        }
    }

    #[test]
    fn rt0_divergence_constant() {
        let b = build_reference_basis(2, 2).unwrap();
        let pts = random_points_2d(10, 9);
        for fi in 0..3 {
            let d0 = vj_div(&b.tabulate_2d(pts[0])[fi]);
            for p in &pts {
                assert!((vj_div(&b.tabulate_2d(*p)[fi]) - d0).abs() < 1e-14);
            }
        }
        let b = build_reference_basis(3, 2).unwrap();
        let pts = random_points_3d(10, 9);
        for fi in 0..4 {
            let d0 = vj_div(&b.tabulate_3d(pts[0])[fi]);
            assert!(d0.abs() > 0.1);
            for p in &pts {
                assert!((vj_div(&b.tabulate_3d(*p)[fi]) - d0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn outside_points_rejected() {
        let b = build_reference_basis(2, 2).unwrap();
        assert!(matches!(eval_basis(&b, &[0.0, -0.1]), Err(HdgError::OutsideElement(_))));
        assert!(matches!(eval_basis(&b, &[0.9, 0.5]), Err(HdgError::OutsideElement(_))));
        assert!(eval_basis(&b, &[1.0, 0.0]).is_ok());
        let b = build_reference_basis(3, 2).unwrap();
        assert!(matches!(eval_basis(&b, &[0.0, 0.5, 0.6]), Err(HdgError::OutsideElement(_))));
        assert!(eval_basis(&b, &[0.0, 0.2, 0.2]).is_ok());
    }

    #[test]
    fn vertex_evaluation_is_finite() {
        for k in 1..=6 {
            let b = build_reference_basis(2, k).unwrap();
            for v in REF_VERTICES_2D {
                for (val, d) in eval_basis(&b, &v).unwrap() {
                    assert!(val.iter().all(|x| x.is_finite()) && d.is_finite());
                }
            }
        }
        let b = build_reference_basis(3, 3).unwrap();
        for v in REF_VERTICES_3D {
            for (val, d) in eval_basis(&b, &v).unwrap() {
                assert!(val.iter().all(|x| x.is_finite()) && d.is_finite());
            }
        }
    }

    #[test]
    fn normal_orthogonality() {
        for k in 1..=6 {
            let b = build_reference_basis(2, k).unwrap();
            for f in 0..3 {
                let r = check_normal_orthogonality(&b, f);
                assert!(r < 1e-12, "2D k={k} f={f}: {r}");
                let g = facet_trace_gram(&b, f);
                assert!((0..g.len()).all(|i| g[i][i] > 0.0));
            }
        }
        for k in 1..=4 {
            let b = build_reference_basis(3, k).unwrap();
            for f in 0..4 {
                let r = check_normal_orthogonality(&b, f);
                assert!(r < 1e-12, "3D k={k} f={f}: {r}");
            }
        }
    }

    #[test]
    fn other_facet_traces_vanish() {
        let b = build_reference_basis(2, 4).unwrap();
        let rule = facet_quadrature::<1>(10).unwrap();
        for lf in 0..3 {
            let n = ref_normal_2d(lf);
            for (fi, f) in b.functions.iter().enumerate() {
                if f.facet_id == Some(lf) {
                    continue;
                }
                for s in &rule.points {
                    let v = b.tabulate_2d(edge_points(FACETS_2D[lf], s[0]))[fi];
                    assert!((v[0].v * n[0] + v[1].v * n[1]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn volume_orthogonality() {
        assert_eq!(check_highest_order_volume_orthogonality(&build_reference_basis(2, 1).unwrap()), 0.0);
        for k in 2..=6 {
            let v = check_highest_order_volume_orthogonality(&build_reference_basis(2, k).unwrap());
            assert!(v < 1e-12, "2D k={k}: {v}");
        }
        for k in 2..=4 {
            let v = check_highest_order_volume_orthogonality(&build_reference_basis(3, k).unwrap());
            assert!(v < 1e-12, "3D k={k}: {v}");
        }
    }

    fn gram_2d(b: &ReferenceBasis) -> DMatrix<f64> {
        let rule = simplex_quadrature::<2>(2 * b.k + 2).unwrap();
        let n = b.len();
        let mut g = DMatrix::zeros(n, n);
        for (p, w) in rule.iter() {
            let v = b.tabulate_2d(*p);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * (v[i][0].v * v[j][0].v + v[i][1].v * v[j][1].v);
                }
            }
        }
        g
    }

    #[test]
    fn linear_independence() {
        for k in 1..=6 {
            let g = gram_2d(&build_reference_basis(2, k).unwrap());
            let eig = g.symmetric_eigenvalues();
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let max = eig.iter().copied().fold(0.0, f64::max);
            assert!(min > 0.0 && min / max > 1e-14, "k={k}: cond {}", max / min);
        }
    }

    #[test]
    fn spans_full_polynomial_space() {
        for k in 1..=6 {
            let b = build_reference_basis(2, k).unwrap();
            let rule = simplex_quadrature::<2>(2 * k + 2).unwrap();
            let g = gram_2d(&b);
            let chol = g.clone().cholesky().unwrap();
            for e in monomial_exponents(2, k) {
                for c in 0..2 {
                    let mut rhs = DVector::zeros(b.len());
                    for (p, w) in rule.iter() {
                        let m = monomial(p, &e);
                        for (i, v) in b.tabulate_2d(*p).iter().enumerate() {
                            rhs[i] += w * v[c].v * m;
                        }
                    }
                    let coef = chol.solve(&rhs);
                    let resid = rule
                        .iter()
                        .map(|(p, w)| {
                            let fit: f64 = b.tabulate_2d(*p).iter().zip(coef.iter()).map(|(v, a)| a * v[c].v).sum();
                            w * (monomial(p, &e) - fit).powi(2)
                        })
                        .sum::<f64>()
                        .sqrt();
                    assert!(resid < 1e-10, "k={k} e={e:?} c={c}: {resid}");
                }
            }
        }
    }

    #[test]
    fn divergence_span() {
        for k in 1..=6 {
            let b = build_reference_basis(2, k).unwrap();
            let rule = simplex_quadrature::<2>(2 * k + 2).unwrap();
            let fams: Vec<usize> = b.indices_of(&[ShapeKind::RT0, ShapeKind::CellDiv]);
            let n = fams.len();
            let mut g = DMatrix::zeros(n, n);
            let tab: Vec<Vec<f64>> = rule
                .points
                .iter()
                .map(|p| {
                    let v = b.tabulate_2d(*p);
                    fams.iter().map(|&i| vj_div(&v[i])).collect()
                })
                .collect();
            for (t, w) in tab.iter().zip(&rule.weights) {
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] += w * t[i] * t[j];
                    }
                }
            }
            let pinv = g.clone().pseudo_inverse(1e-13).unwrap();
            for e in monomial_exponents(2, k - 1) {
                let mut rhs = DVector::zeros(n);
                for ((p, w), t) in rule.iter().zip(&tab) {
                    let m = monomial(p, &e);
                    for i in 0..n {
                        rhs[i] += w * t[i] * m;
                    }
                }
                let coef: DVector<f64> = &pinv * &rhs;
                let resid = rule
                    .iter()
                    .zip(&tab)
                    .map(|((p, w), t)| {
                        let fit: f64 = t.iter().zip(coef.iter()).map(|(d, a)| a * d).sum();
                        w * (monomial(p, &e) - fit).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                assert!(resid < 1e-10, "k={k} e={e:?}: {resid}");
            }
            // all other functions are solenoidal
            for p in random_points_2d(5, 1) {
                for (i, v) in b.tabulate_2d(p).iter().enumerate() {
                    if !fams.contains(&i) {
                        assert!(vj_div(v).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let eps = 1e-6;
        let b = build_reference_basis(2, 4).unwrap();
        for p in random_points_2d(5, 21) {
            let base = b.tabulate_2d(p);
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += eps;
                pm[d] -= eps;
                let (vp, vm) = (b.tabulate_2d(pp), b.tabulate_2d(pm));
                for i in 0..b.len() {
                    for c in 0..2 {
                        let fd = (vp[i][c].v - vm[i][c].v) / (2.0 * eps);
                        assert!((fd - base[i][c].g[d]).abs() < 1e-6 * (1.0 + fd.abs()));
                    }
                }
            }
        }
        let b = build_reference_basis(3, 3).unwrap();
        for p in random_points_3d(3, 22) {
            let base = b.tabulate_3d(p);
            for d in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += eps;
                pm[d] -= eps;
                let (vp, vm) = (b.tabulate_3d(pp), b.tabulate_3d(pm));
                for i in 0..b.len() {
                    for c in 0..3 {
                        let fd = (vp[i][c].v - vm[i][c].v) / (2.0 * eps);
                        assert!((fd - base[i][c].g[d]).abs() < 1e-6 * (1.0 + fd.abs()));
                    }
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn solenoidal_families_at_random_points(k in 1usize..=6, x in -1.0f64..1.0, t in 0.0f64..1.0) {
            let y = t * (1.0 - x.abs());
            let b = build_reference_basis(2, k).unwrap();
            for (v, f) in b.tabulate_2d([x, y]).iter().zip(&b.functions) {
                if matches!(f.kind, ShapeKind::FacetHigh | ShapeKind::CellDivFree) {
                    proptest::prop_assert!(vj_div(v).abs() < 1e-11);
                }
            }
        }
    }
}
