//! Global velocity, facet and pressure spaces on a 2D mesh.
//!
//! Global layout of the free unknowns:
//! `[interface velocity by facet | pressure constants by element | element-local dofs by element]`.
//! Dirichlet-constrained unknowns on boundary facets are eliminated and have
//! no global index.

use crate::error::{HdgError, Result};
use crate::jet::{vj_div, VecJet};
use crate::mesh::{AffineMap, Mesh};
use crate::polyquad::{facet_quadrature, legendre_all, scaled_jacobi_all, simplex_quadrature, QuadratureRule};
use crate::refbasis::{build_reference_basis, ReferenceBasis, ShapeKind, FACETS_2D, REF_VERTICES_2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConformityMode {
    Full,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofClass {
    InterfaceNormal { facet: usize, order: usize },
    InterfaceTangential { facet: usize, order: usize },
    LocalCell { element: usize },
    /// `side` is 0 for the left and 1 for the right neighbour.
    LocalSplitFacet { facet: usize, side: usize, element: usize },
    PressureConst { element: usize },
    PressureHigh { element: usize },
}

impl DofClass {
    /// Eliminated by static condensation.
    pub fn is_local(&self) -> bool {
        matches!(self, DofClass::LocalCell { .. } | DofClass::LocalSplitFacet { .. } | DofClass::PressureHigh { .. })
    }
}

/// Local unknowns of one element: velocity functions, then `3k` facet
/// tangential coefficients (facet major), then pressure functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementDofs {
    pub global: Vec<Option<usize>>,
    /// Orientation sign of each local velocity function (1 for the rest).
    pub sign: Vec<f64>,
}

/// The order-k normal mode of one facet split between its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitFacet {
    pub facet: usize,
    pub left: usize,
    pub right: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub mode: ConformityMode,
    pub reduced: bool,
    pub basis: ReferenceBasis,
    /// Reference functions carried by every element, in local order.
    pub vel_funcs: Vec<usize>,
    /// `(i, j)` indices of the local pressure functions; `(0, 0)` first.
    pub pressure_indices: Vec<(usize, usize)>,
    pub classes: Vec<DofClass>,
    pub elements: Vec<ElementDofs>,
    pub splits: Vec<SplitFacet>,
    pub n_interface: usize,
    pub n_elements: usize,
    pub n_constrained: usize,
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        self.classes.len()
    }

    pub fn n_vel_local(&self) -> usize {
        self.vel_funcs.len()
    }

    pub fn n_pressure_local(&self) -> usize {
        self.pressure_indices.len()
    }

    pub fn n_local(&self) -> usize {
        self.n_vel_local() + 3 * self.k + self.n_pressure_local()
    }

    pub fn tang_local(&self, lf: usize, j: usize) -> usize {
        self.n_vel_local() + lf * self.k + j
    }

    pub fn pressure_local(&self, m: usize) -> usize {
        self.n_vel_local() + 3 * self.k + m
    }

    /// All unknowns, Dirichlet-constrained ones included.
    pub fn dofs(&self) -> usize {
        self.n_free() + self.n_constrained
    }

    /// Globally coupled unknowns after condensation, mean multiplier included.
    pub fn gdofs(&self) -> usize {
        self.n_interface + self.n_elements + 1
    }

    /// First global index of the element-local block.
    pub fn local_offset(&self) -> usize {
        self.n_interface + self.n_elements
    }

    pub fn pressure_const_index(&self, t: usize) -> usize {
        self.n_interface + t
    }

    /// Count of velocity unknowns carried by elements, summed over elements.
    pub fn velocity_volume_dofs(&self) -> usize {
        self.n_elements * self.n_vel_local()
    }

    pub fn count_class(&self, f: impl Fn(&DofClass) -> bool) -> usize {
        self.classes.iter().filter(|c| f(c)).count()
    }
}

/// Sign of the normal-trace orientation of reference function `fi` on
/// element `t`; 1 for cell functions.
pub fn facet_function_sign(mesh: &Mesh, basis: &ReferenceBasis, t: usize, fi: usize, det: f64) -> f64 {
    let f = &basis.functions[fi];
    match f.facet_id {
        None => 1.0,
        Some(lf) => {
            let facet = &mesh.facets[mesh.element_facets[t][lf]];
            let side = if facet.left == t { 1.0 } else { -1.0 };
            f.trace_scale.signum() * det.signum() * side
        }
    }
}

/// Numbers all unknowns of the velocity, facet and pressure spaces.
pub fn build_dof_map(mesh: &Mesh, k: usize, mode: ConformityMode) -> Result<DofMap> {
    build_dof_map_with(mesh, k, mode, false)
}

/// As [`build_dof_map`]; `reduced` drops the non-solenoidal cell functions
/// and all non-constant pressure functions.
pub fn build_dof_map_with(mesh: &Mesh, k: usize, mode: ConformityMode, reduced: bool) -> Result<DofMap> {
    let basis = build_reference_basis(2, k)?;
    let vel_funcs: Vec<usize> = (0..basis.len())
        .filter(|&i| !(reduced && basis.functions[i].kind == ShapeKind::CellDiv))
        .collect();
    let mut pressure_indices = Vec::new();
    for d in 0..k {
        for i in 0..=d {
            if !reduced || d == 0 {
                pressure_indices.push((i, d - i));
            }
        }
    }
    let n_vel = vel_funcs.len();
    let np = pressure_indices.len();
    let nl = n_vel + 3 * k + np;
    let ne = mesh.n_elements();
    let nf_normal = match mode {
        ConformityMode::Full => k + 1,
        ConformityMode::Relaxed => k,
    };

    let mut classes = Vec::new();
    // facet -> (global index of normal order o, of tangential order j)
    let mut facet_normal = vec![Vec::<Option<usize>>::new(); mesh.facets.len()];
    let mut facet_tang = vec![Vec::<Option<usize>>::new(); mesh.facets.len()];
    let mut n_constrained = 0;
    for (fid, f) in mesh.facets.iter().enumerate() {
        if f.is_boundary() {
            facet_normal[fid] = vec![None; nf_normal];
            facet_tang[fid] = vec![None; k];
            n_constrained += nf_normal + k;
        } else {
            for o in 0..nf_normal {
                facet_normal[fid].push(Some(classes.len()));
                classes.push(DofClass::InterfaceNormal { facet: fid, order: o });
            }
            for j in 0..k {
                facet_tang[fid].push(Some(classes.len()));
                classes.push(DofClass::InterfaceTangential { facet: fid, order: j });
            }
        }
    }
    let n_interface = classes.len();
    for t in 0..ne {
        classes.push(DofClass::PressureConst { element: t });
    }

    let mut elements = Vec::with_capacity(ne);
    let mut split_slots: Vec<[Option<usize>; 2]> = vec![[None, None]; mesh.facets.len()];
    for t in 0..ne {
        let det = mesh.element_map(t)?.det;
        let mut global = vec![None; nl];
        let mut sign = vec![1.0; nl];
        for (a, &fi) in vel_funcs.iter().enumerate() {
            let sf = &basis.functions[fi];
            sign[a] = facet_function_sign(mesh, &basis, t, fi, det);
            match sf.facet_id {
                Some(lf) => {
                    let fid = mesh.element_facets[t][lf];
                    let facet = &mesh.facets[fid];
                    if sf.order < nf_normal {
                        global[a] = facet_normal[fid][sf.order];
                    } else {
                        let side = if facet.left == t { 0 } else { 1 };
                        global[a] = Some(classes.len());
                        split_slots[fid][side] = Some(classes.len());
                        classes.push(DofClass::LocalSplitFacet { facet: fid, side, element: t });
                    }
                }
                None => {
                    global[a] = Some(classes.len());
                    classes.push(DofClass::LocalCell { element: t });
                }
            }
        }
        for lf in 0..3 {
            let fid = mesh.element_facets[t][lf];
            for j in 0..k {
                global[n_vel + lf * k + j] = facet_tang[fid][j];
            }
        }
        global[n_vel + 3 * k] = Some(n_interface + t);
        for m in 1..np {
            global[n_vel + 3 * k + m] = Some(classes.len());
            classes.push(DofClass::PressureHigh { element: t });
        }
        elements.push(ElementDofs { global, sign });
    }
    let splits = if mode == ConformityMode::Relaxed {
        mesh.facets
            .iter()
            .enumerate()
            .map(|(fid, f)| SplitFacet {
                facet: fid,
                left: split_slots[fid][0].expect("left split dof"),
                right: f.right.map(|_| split_slots[fid][1].expect("right split dof")),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(DofMap { k, mode, reduced, basis, vel_funcs, pressure_indices, classes, elements, splits, n_interface, n_elements: ne, n_constrained })
}

/// Per-element sign table of the local velocity functions.
pub fn sign_fix(mesh: &Mesh, dof_map: &DofMap) -> Vec<Vec<f64>> {
    let _ = mesh;
    dof_map.elements.iter().map(|e| e.sign[..dof_map.n_vel_local()].to_vec()).collect()
}

/// Contravariant Piola transform of a reference vector and divergence.
pub fn piola_map(map: &AffineMap, reference_vector: [f64; 2], reference_divergence: f64) -> Result<([f64; 2], f64)> {
    if map.det.abs() < 1e-300 || !map.det.is_finite() {
        return Err(HdgError::SingularJacobian(map.det));
    }
    let m = &map.matrix;
    let v = reference_vector;
    Ok((
        [(m[0][0] * v[0] + m[0][1] * v[1]) / map.det, (m[1][0] * v[0] + m[1][1] * v[1]) / map.det],
        reference_divergence / map.det,
    ))
}

/// Physical value, Jacobian `G[c][i] = ∂_i v_c` and divergence of a Piola
/// mapped reference jet.
#[inline]
pub fn piola_jet(map: &AffineMap, v: &VecJet<2>) -> ([f64; 2], [[f64; 2]; 2], f64) {
    let m = &map.matrix;
    let inv = map.inverse_matrix();
    let d = map.det;
    let val = [(m[0][0] * v[0].v + m[0][1] * v[1].v) / d, (m[1][0] * v[0].v + m[1][1] * v[1].v) / d];
    let gr = [[v[0].g[0], v[0].g[1]], [v[1].g[0], v[1].g[1]]];
    let mut jg = [[0.0; 2]; 2];
    for c in 0..2 {
        for i in 0..2 {
            jg[c][i] = m[c][0] * gr[0][i] + m[c][1] * gr[1][i];
        }
    }
    let mut g = [[0.0; 2]; 2];
    for c in 0..2 {
        for i in 0..2 {
            g[c][i] = (jg[c][0] * inv[0][i] + jg[c][1] * inv[1][i]) / d;
        }
    }
    (val, g, vj_div(v) / d)
}

/// Reference point of local facet `lf` at parameter `s ∈ [-1,1]`.
pub fn facet_ref_point(lf: usize, s: f64) -> [f64; 2] {
    let f = FACETS_2D[lf];
    let a = REF_VERTICES_2D[f[0]];
    let b = REF_VERTICES_2D[f[1]];
    let t = 0.5 * (1.0 + s);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Dubiner pressure function `(i, j)` on the reference triangle.
pub fn pressure_reference(i: usize, j: usize, p: [f64; 2]) -> f64 {
    let [x, y] = p;
    let l1 = 0.5 * (1.0 - x - y);
    let l2 = 0.5 * (1.0 + x - y);
    let a = scaled_jacobi_all(i, 0, l2 - l1, l2 + l1)[i];
    let b = scaled_jacobi_all(j, 2 * i + 1, 2.0 * y - 1.0, 1.0)[j];
    a * b
}

/// L²(F) projection onto Legendre polynomials of degree `<= k-1` along a
/// facet parameterized by `s ∈ [-1, 1]`.
#[derive(Debug, Clone)]
pub struct FacetProjection {
    pub k: usize,
    pub rule: QuadratureRule<1>,
    /// `legendre[q][j] = P_j(s_q)` for `j = 0..=k`.
    pub legendre: Vec<Vec<f64>>,
}

impl FacetProjection {
    pub fn new(k: usize, degree: usize) -> Self {
        let rule = facet_quadrature::<1>(degree).expect("1D rule");
        let legendre = rule.points.iter().map(|s| legendre_all(k, s[0])).collect();
        Self { k, rule, legendre }
    }

    /// Legendre coefficients `0..k` of the projection of samples at the rule points.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.k];
        for (q, (v, w)) in values.iter().zip(&self.rule.weights).enumerate() {
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += w * v * self.legendre[q][j];
            }
        }
        for (j, cj) in c.iter_mut().enumerate() {
            *cj *= (2 * j + 1) as f64 / 2.0;
        }
        c
    }

    /// Values of a Legendre expansion at the rule points.
    pub fn evaluate(&self, coeffs: &[f64]) -> Vec<f64> {
        self.rule
            .points
            .iter()
            .map(|s| {
                let p = legendre_all(coeffs.len().saturating_sub(1), s[0]);
                coeffs.iter().zip(&p).map(|(c, p)| c * p).sum()
            })
            .collect()
    }

    /// `∫_F P_j²` on a facet of length `len`.
    pub fn mass(len: f64, j: usize) -> f64 {
        len / (2 * j + 1) as f64
    }
}

/// Projection of facet samples onto `P^{k-1}(F)` in Legendre coefficients.
pub fn facet_project(projection: &FacetProjection, facet: usize, trace_values: &[f64]) -> Vec<f64> {
    let _ = facet;
    projection.project(trace_values)
}

/// A discrete velocity: coefficients of the unsigned Piola-mapped reference
/// functions per element (full basis order) and Legendre coefficients of
/// the facet tangential unknowns per facet.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub k: usize,
    pub element_coeffs: Vec<Vec<f64>>,
    pub facet_coeffs: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn zero(mesh: &Mesh, basis: &ReferenceBasis) -> Self {
        Self {
            k: basis.k,
            element_coeffs: vec![vec![0.0; basis.len()]; mesh.n_elements()],
            facet_coeffs: vec![vec![0.0; basis.k]; mesh.facets.len()],
        }
    }

    /// Field described by a vector of free unknowns.
    pub fn from_global(mesh: &Mesh, dm: &DofMap, x: &[f64]) -> Self {
        let mut f = Self::zero(mesh, &dm.basis);
        for (t, ed) in dm.elements.iter().enumerate() {
            for (a, &fi) in dm.vel_funcs.iter().enumerate() {
                if let Some(g) = ed.global[a] {
                    f.element_coeffs[t][fi] = ed.sign[a] * x[g];
                }
            }
        }
        for (g, c) in dm.classes.iter().enumerate() {
            if let DofClass::InterfaceTangential { facet, order } = c {
                f.facet_coeffs[*facet][*order] = x[g];
            }
        }
        f
    }

    /// Inverse of [`VelocityField::from_global`] on velocity unknowns;
    /// split and constrained coefficients are read from the left side.
    pub fn to_global(&self, dm: &DofMap, x: &mut [f64]) {
        for (t, ed) in dm.elements.iter().enumerate() {
            for (a, &fi) in dm.vel_funcs.iter().enumerate() {
                if let Some(g) = ed.global[a] {
                    x[g] = ed.sign[a] * self.element_coeffs[t][fi];
                }
            }
        }
        for (g, c) in dm.classes.iter().enumerate() {
            if let DofClass::InterfaceTangential { facet, order } = c {
                x[g] = self.facet_coeffs[*facet][*order];
            }
        }
    }

    /// Value, Jacobian and divergence on element `t` at reference point `xr`.
    pub fn eval(&self, mesh: &Mesh, basis: &ReferenceBasis, t: usize, xr: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let map = mesh.element_map(t).expect("valid element");
        self.eval_tabulated(&map, &basis.tabulate_2d(xr), t)
    }

    /// As [`VelocityField::eval`] from a reference tabulation.
    pub fn eval_tabulated(&self, map: &AffineMap, tab: &[VecJet<2>], t: usize) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        let mut d = 0.0;
        for (c, phi) in self.element_coeffs[t].iter().zip(tab) {
            if *c == 0.0 {
                continue;
            }
            let (pv, pg, pd) = piola_jet(map, phi);
            for i in 0..2 {
                v[i] += c * pv[i];
                for j in 0..2 {
                    g[i][j] += c * pg[i][j];
                }
            }
            d += c * pd;
        }
        (v, g, d)
    }

    /// Facet tangential unknown at parameter `s`.
    pub fn facet_value(&self, f: usize, s: f64) -> f64 {
        let p = legendre_all(self.k, s);
        self.facet_coeffs[f].iter().zip(&p).map(|(c, p)| c * p).sum()
    }
}

/// Reference tabulations shared by all elements of one order.
#[derive(Debug, Clone)]
pub struct ReferenceTables {
    pub vol_rule: QuadratureRule<2>,
    pub vol: Vec<Vec<VecJet<2>>>,
    pub pressure: Vec<Vec<f64>>,
    pub facet: FacetProjection,
    /// `facet_tab[lf][q]` holds all basis functions at facet point `q`.
    pub facet_tab: Vec<Vec<Vec<VecJet<2>>>>,
}

impl ReferenceTables {
    pub fn new(dm: &DofMap, vol_degree: usize, facet_degree: usize) -> Self {
        let vol_rule = simplex_quadrature::<2>(vol_degree).expect("triangle rule");
        let vol = vol_rule.points.iter().map(|p| dm.basis.tabulate_2d(*p)).collect();
        let pressure = vol_rule
            .points
            .iter()
            .map(|p| dm.pressure_indices.iter().map(|&(i, j)| pressure_reference(i, j, *p)).collect())
            .collect();
        let facet = FacetProjection::new(dm.k, facet_degree);
        let facet_tab = (0..3)
            .map(|lf| facet.rule.points.iter().map(|s| dm.basis.tabulate_2d(facet_ref_point(lf, s[0]))).collect())
            .collect();
        Self { vol_rule, vol, pressure, facet, facet_tab }
    }
}
