//! Element matrices of the viscous form `A` and the divergence form `B`,
//! load vectors, the averaging reconstruction and the BDM-type oracle.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::fespace::{build_dof_map_with, facet_ref_point, piola_jet, ConformityMode, DofMap, FacetProjection, ReferenceTables, SplitFacet, VelocityField};
use crate::mesh::Mesh;
use crate::polyquad::{legendre_all, simplex_quadrature};
use crate::refbasis::monomial_exponents;

pub const DEFAULT_LAMBDA: f64 = 4.0;

/// Default penalty per order; `k = 1` carries no `k²` gain and needs more.
pub fn default_lambda(k: usize) -> f64 {
    if k == 1 {
        8.0
    } else {
        DEFAULT_LAMBDA
    }
}

/// Weights of the three parts of the viscous bilinear form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousWeights {
    pub volume: f64,
    pub consistency: f64,
    pub penalty: f64,
}

impl ViscousWeights {
    /// The form `A` itself; the penalty multiplies `1/h_F`.
    pub fn stokes(nu: f64, lambda: f64, k: usize) -> Self {
        Self { volume: nu, consistency: nu, penalty: nu * lambda * (k * k) as f64 }
    }

    /// The discrete energy norm `|||·|||₁²` (penalty weight `1/h_F` without `k²`).
    pub fn energy_norm() -> Self {
        Self { volume: 1.0, consistency: 0.0, penalty: 1.0 }
    }
}

/// Per-facet data of the local velocity functions of one element.
struct FacetTraces {
    /// Legendre coefficients (`j < k`) of `v·t` per local velocity function.
    tangential: Vec<Vec<f64>>,
    /// Legendre coefficients (`j < k`) of `t·(∇v n)` per local velocity function.
    normal_derivative: Vec<Vec<f64>>,
    length: f64,
}

fn facet_traces(mesh: &Mesh, dm: &DofMap, tabs: &ReferenceTables, t: usize, lf: usize) -> Result<FacetTraces> {
    let map = mesh.element_map(t)?;
    let facet = &mesh.facets[mesh.element_facets[t][lf]];
    let n = mesh.outward_normal(t, lf);
    let tg = facet.tangent;
    let sign = &dm.elements[t].sign;
    let nq = tabs.facet.rule.len();
    let mut tangential = Vec::with_capacity(dm.n_vel_local());
    let mut normal_derivative = Vec::with_capacity(dm.n_vel_local());
    let mut tau = vec![0.0; nq];
    let mut dn = vec![0.0; nq];
    for (a, &fi) in dm.vel_funcs.iter().enumerate() {
        for q in 0..nq {
            let (v, g, _) = piola_jet(&map, &tabs.facet_tab[lf][q][fi]);
            tau[q] = sign[a] * (v[0] * tg[0] + v[1] * tg[1]);
            let gn = [g[0][0] * n[0] + g[0][1] * n[1], g[1][0] * n[0] + g[1][1] * n[1]];
            dn[q] = sign[a] * (tg[0] * gn[0] + tg[1] * gn[1]);
        }
        tangential.push(tabs.facet.project(&tau));
        normal_derivative.push(tabs.facet.project(&dn));
    }
    Ok(FacetTraces { tangential, normal_derivative, length: facet.length })
}

/// Viscous element matrix over `[velocity functions | 3k tangential]`.
pub fn element_viscous_matrix(mesh: &Mesh, dm: &DofMap, tabs: &ReferenceTables, t: usize, w: ViscousWeights) -> Result<DMatrix<f64>> {
    let map = mesh.element_map(t)?;
    let nv = dm.n_vel_local();
    let k = dm.k;
    let n = nv + 3 * k;
    let sign = &dm.elements[t].sign;
    let mut m = DMatrix::zeros(n, n);
    let jac = map.det.abs();
    let mut grads = vec![[[0.0; 2]; 2]; nv];
    for (q, row) in tabs.vol.iter().enumerate() {
        let wq = tabs.vol_rule.weights[q] * jac * w.volume;
        for (a, &fi) in dm.vel_funcs.iter().enumerate() {
            let (_, g, _) = piola_jet(&map, &row[fi]);
            grads[a] = g.map(|r| r.map(|x| sign[a] * x));
        }
        for a in 0..nv {
            for b in a..nv {
                let (ga, gb) = (&grads[a], &grads[b]);
                let s = ga[0][0] * gb[0][0] + ga[0][1] * gb[0][1] + ga[1][0] * gb[1][0] + ga[1][1] * gb[1][1];
                m[(a, b)] += wq * s;
            }
        }
    }
    for a in 0..nv {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    for lf in 0..3 {
        let tr = facet_traces(mesh, dm, tabs, t, lf)?;
        let pen = w.penalty / tr.length;
        // jump coefficients of every local unknown: velocity τ, tangential -e_j
        let jump = |i: usize, j: usize| -> f64 {
            if i < nv {
                tr.tangential[i][j]
            } else if i == nv + lf * k + j {
                -1.0
            } else {
                0.0
            }
        };
        let dnc = |i: usize, j: usize| -> f64 {
            if i < nv {
                tr.normal_derivative[i][j]
            } else {
                0.0
            }
        };
        let active: Vec<usize> = (0..nv).chain(nv + lf * k..nv + (lf + 1) * k).collect();
        for j in 0..k {
            let mj = FacetProjection::mass(tr.length, j);
            for &r in &active {
                let (jr, dr) = (jump(r, j), dnc(r, j));
                for &c in &active {
                    let (jc, dc) = (jump(c, j), dnc(c, j));
                    m[(r, c)] += mj * (pen * jr * jc - w.consistency * (dc * jr + dr * jc));
                }
            }
        }
    }
    Ok(m)
}

/// `B_T[m][a] = -∫_T q_m div(φ_a)`.
pub fn element_divergence_matrix(mesh: &Mesh, dm: &DofMap, tabs: &ReferenceTables, t: usize) -> Result<DMatrix<f64>> {
    let map = mesh.element_map(t)?;
    let sign = &dm.elements[t].sign;
    let mut b = DMatrix::zeros(dm.n_pressure_local(), dm.n_vel_local());
    let jac = map.det.abs();
    for (q, row) in tabs.vol.iter().enumerate() {
        let wq = tabs.vol_rule.weights[q] * jac;
        for (a, &fi) in dm.vel_funcs.iter().enumerate() {
            let (_, _, d) = piola_jet(&map, &row[fi]);
            let d = sign[a] * d * wq;
            for (mi, qv) in tabs.pressure[q].iter().enumerate() {
                b[(mi, a)] -= qv * d;
            }
        }
    }
    Ok(b)
}

/// `∫_T f·φ_a` for every local velocity function.
pub fn element_load(mesh: &Mesh, dm: &DofMap, tabs: &ReferenceTables, t: usize, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Result<DVector<f64>> {
    let map = mesh.element_map(t)?;
    let sign = &dm.elements[t].sign;
    let jac = map.det.abs();
    let mut l = DVector::zeros(dm.n_vel_local());
    for (q, row) in tabs.vol.iter().enumerate() {
        let fx = f(map.apply(tabs.vol_rule.points[q]));
        let wq = tabs.vol_rule.weights[q] * jac;
        for (a, &fi) in dm.vel_funcs.iter().enumerate() {
            let (v, _, _) = piola_jet(&map, &row[fi]);
            l[a] += wq * sign[a] * (fx[0] * v[0] + fx[1] * v[1]);
        }
    }
    Ok(l)
}

/// Assembled element blocks of the discrete Stokes problem.
#[derive(Debug, Clone)]
pub struct StokesSystem {
    pub mesh: Mesh,
    pub dof_map: DofMap,
    pub tables: ReferenceTables,
    pub nu: f64,
    pub lambda: f64,
    /// Local saddle-point matrices `[[A_T, B_Tᵀ], [B_T, 0]]` in local layout.
    pub local: Vec<DMatrix<f64>>,
    /// Mean-constraint weight `|T|` of each constant pressure.
    pub areas: Vec<f64>,
}

impl StokesSystem {
    pub fn new(mesh: &Mesh, k: usize, mode: ConformityMode, nu: f64, lambda: f64) -> Result<Self> {
        Self::with_reduction(mesh, k, mode, nu, lambda, false)
    }

    pub fn with_reduction(mesh: &Mesh, k: usize, mode: ConformityMode, nu: f64, lambda: f64, reduced: bool) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(HdgError::InvalidConfig(format!("viscosity must be positive, got {nu}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(HdgError::InvalidConfig(format!("penalty must be positive, got {lambda}")));
        }
        let dof_map = build_dof_map_with(mesh, k, mode, reduced)?;
        let tables = ReferenceTables::new(&dof_map, 2 * k + 6, 2 * k + 2);
        let w = ViscousWeights::stokes(nu, lambda, k);
        let local = (0..mesh.n_elements())
            .into_par_iter()
            .map(|t| {
                let a = element_viscous_matrix(mesh, &dof_map, &tables, t, w)?;
                let b = element_divergence_matrix(mesh, &dof_map, &tables, t)?;
                let nu_ = a.nrows();
                let n = dof_map.n_local();
                let mut m = DMatrix::zeros(n, n);
                m.view_mut((0, 0), (nu_, nu_)).copy_from(&a);
                let nv = dof_map.n_vel_local();
                let off = dof_map.pressure_local(0);
                m.view_mut((off, 0), (b.nrows(), nv)).copy_from(&b);
                m.view_mut((0, off), (nv, b.nrows())).copy_from(&b.transpose());
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        let areas = (0..mesh.n_elements()).map(|t| mesh.element_area(t)).collect();
        Ok(Self { mesh: mesh.clone(), dof_map, tables, nu, lambda, local, areas })
    }

    pub fn k(&self) -> usize {
        self.dof_map.k
    }

    pub fn mode(&self) -> ConformityMode {
        self.dof_map.mode
    }

    /// Unknowns of the monolithic system, mean multiplier last.
    pub fn n_unknowns(&self) -> usize {
        self.dof_map.n_free() + 1
    }

    pub fn multiplier_index(&self) -> usize {
        self.dof_map.n_free()
    }

    /// Triplets of the monolithic saddle-point matrix with mean constraint.
    pub fn monolithic_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut trips = Vec::new();
        for (t, m) in self.local.iter().enumerate() {
            let g = &self.dof_map.elements[t].global;
            for (i, gi) in g.iter().enumerate() {
                let Some(gi) = gi else { continue };
                for (j, gj) in g.iter().enumerate() {
                    let Some(gj) = gj else { continue };
                    let v = m[(i, j)];
                    if v != 0.0 {
                        trips.push((*gi, *gj, v));
                    }
                }
            }
        }
        let mi = self.multiplier_index();
        for t in 0..self.mesh.n_elements() {
            let p = self.dof_map.pressure_const_index(t);
            trips.push((mi, p, self.areas[t]));
            trips.push((p, mi, self.areas[t]));
        }
        trips
    }

    /// Dense global viscous block over all free unknowns (pressure rows zero).
    pub fn viscous_dense(&self) -> DMatrix<f64> {
        self.assemble_dense(|i, j, dm| i < dm.pressure_local(0) && j < dm.pressure_local(0))
    }

    /// Dense global divergence block: pressure rows, velocity columns, in
    /// global indexing.
    pub fn divergence_dense(&self) -> DMatrix<f64> {
        self.assemble_dense(|i, j, dm| i >= dm.pressure_local(0) && j < dm.n_vel_local())
    }

    fn assemble_dense(&self, keep: impl Fn(usize, usize, &DofMap) -> bool) -> DMatrix<f64> {
        let n = self.dof_map.n_free();
        let mut out = DMatrix::zeros(n, n);
        for (t, m) in self.local.iter().enumerate() {
            let g = &self.dof_map.elements[t].global;
            for (i, gi) in g.iter().enumerate() {
                for (j, gj) in g.iter().enumerate() {
                    if let (Some(gi), Some(gj)) = (gi, gj) {
                        if keep(i, j, &self.dof_map) {
                            out[(*gi, *gj)] += m[(i, j)];
                        }
                    }
                }
            }
        }
        out
    }

    /// Dense energy-norm matrix `|||·|||₁²` over all free unknowns.
    pub fn energy_norm_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.dof_map.n_free();
        let mut out = DMatrix::zeros(n, n);
        for t in 0..self.mesh.n_elements() {
            let m = element_viscous_matrix(&self.mesh, &self.dof_map, &self.tables, t, ViscousWeights::energy_norm())?;
            let g = &self.dof_map.elements[t].global;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if let (Some(gi), Some(gj)) = (g[i], g[j]) {
                        out[(gi, gj)] += m[(i, j)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Free velocity unknowns (interface, split and cell) in global order.
    pub fn velocity_indices(&self) -> Vec<usize> {
        let mut seen = vec![false; self.dof_map.n_free()];
        for e in &self.dof_map.elements {
            for g in e.global[..self.dof_map.pressure_local(0)].iter().flatten() {
                seen[*g] = true;
            }
        }
        (0..seen.len()).filter(|&i| seen[i]).collect()
    }

    pub fn pressure_indices(&self) -> Vec<usize> {
        let mut seen = vec![false; self.dof_map.n_free()];
        for e in &self.dof_map.elements {
            for g in e.global[self.dof_map.pressure_local(0)..].iter().flatten() {
                seen[*g] = true;
            }
        }
        (0..seen.len()).filter(|&i| seen[i]).collect()
    }
}

/// Load vector `f(v)` over the free unknowns (zero on pressures).
pub fn rhs_basic(system: &StokesSystem, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Result<Vec<f64>> {
    let dm = &system.dof_map;
    let loads = (0..system.mesh.n_elements())
        .into_par_iter()
        .map(|t| element_load(&system.mesh, dm, &system.tables, t, f))
        .collect::<Result<Vec<_>>>()?;
    let mut b = vec![0.0; dm.n_free()];
    for (t, l) in loads.iter().enumerate() {
        for (a, v) in l.iter().enumerate() {
            if let Some(g) = dm.elements[t].global[a] {
                b[g] += v;
            }
        }
    }
    Ok(b)
}

/// Load vector `f(R v)` of the pressure-robust variant.
pub fn rhs_pr(system: &StokesSystem, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Result<Vec<f64>> {
    let r = build_reconstruction(&system.dof_map)?;
    Ok(r.apply_transpose(&rhs_basic(system, f)?))
}

/// The averaging operator `R`: the split order-k normal modes of each
/// interior facet are replaced by their mean, boundary ones by zero; every
/// other unknown is unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub pairs: Vec<SplitFacet>,
    pub n: usize,
}

impl Reconstruction {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for p in &self.pairs {
            match p.right {
                Some(r) => {
                    let m = 0.5 * (x[p.left] + x[r]);
                    y[p.left] = m;
                    y[r] = m;
                }
                None => y[p.left] = 0.0,
            }
        }
        y
    }

    /// `Rᵀ` equals `R` for this symmetric operator.
    pub fn apply_transpose(&self, b: &[f64]) -> Vec<f64> {
        self.apply(b)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut touched = vec![false; self.n];
        let mut trips = Vec::new();
        for p in &self.pairs {
            touched[p.left] = true;
            if let Some(r) = p.right {
                touched[r] = true;
                for (i, j) in [(p.left, p.left), (p.left, r), (r, p.left), (r, r)] {
                    trips.push((i, j, 0.5));
                }
            }
        }
        trips.extend((0..self.n).filter(|&i| !touched[i]).map(|i| (i, i, 1.0)));
        trips
    }
}

pub fn build_reconstruction(dof_map: &DofMap) -> Result<Reconstruction> {
    if dof_map.mode != ConformityMode::Relaxed {
        return Err(HdgError::RequiresRelaxed);
    }
    Ok(Reconstruction { pairs: dof_map.splits.clone(), n: dof_map.n_free() })
}

/// Spanning set of the reference Nédélec space of the first kind of
/// order `r`: `(a, b, kind)` is `x^a y^b` times `e_x`, `e_y` or `(y, -x)`.
fn nedelec_reference(r: usize) -> Vec<(i32, i32, u8)> {
    let mut out = Vec::new();
    for e in monomial_exponents(2, r) {
        out.push((e[0] as i32, e[1] as i32, 0));
        out.push((e[0] as i32, e[1] as i32, 1));
    }
    for a in 0..=r as i32 {
        out.push((a, r as i32 - a, 2));
    }
    out
}

fn nedelec_eval((a, b, kind): (i32, i32, u8), p: [f64; 2]) -> [f64; 2] {
    let m = p[0].powi(a) * p[1].powi(b);
    match kind {
        0 => [m, 0.0],
        1 => [0.0, m],
        _ => [m * p[1], -m * p[0]],
    }
}

/// Local BDM-type interpolation: facet moments against `P^k` of the
/// averaged normal trace (the own trace on the boundary) and volume moments
/// against Nédélec fields of order `k-2`.
pub fn bdm_interpolate(mesh: &Mesh, dof_map: &DofMap, field: &VelocityField) -> Result<VelocityField> {
    let basis = &dof_map.basis;
    let k = basis.k;
    let nb = basis.len();
    let proj = FacetProjection::new(k, 2 * k + 4);
    let vol = simplex_quadrature::<2>(2 * k + 2)?;
    let ned = if k >= 2 { nedelec_reference(k - 2) } else { Vec::new() };
    let coeffs = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = mesh.element_map(t)?;
            let mut m = DMatrix::zeros(nb, nb);
            let mut rhs = DVector::zeros(nb);
            let mut row = 0;
            for lf in 0..3 {
                let fid = mesh.element_facets[t][lf];
                let facet = &mesh.facets[fid];
                let n = mesh.outward_normal(t, lf);
                let other = if facet.left == t { facet.right.map(|r| (r, facet.local_right.unwrap())) } else { Some((facet.left, facet.local_left)) };
                for (q, s) in proj.rule.points.iter().enumerate() {
                    let w = proj.rule.weights[q] * facet.length / 2.0;
                    let p = legendre_all(k, s[0]);
                    let tab = basis.tabulate_2d(facet_ref_point(lf, s[0]));
                    let (u, _, _) = field.eval_tabulated(&map, &tab, t);
                    let mut avg = u[0] * n[0] + u[1] * n[1];
                    if let Some((o, lo)) = other {
                        let (uo, _, _) = field.eval(mesh, basis, o, facet_ref_point(lo, s[0]));
                        avg = 0.5 * (avg + uo[0] * n[0] + uo[1] * n[1]);
                    }
                    let traces: Vec<f64> = tab
                        .iter()
                        .map(|phi| {
                            let (v, _, _) = piola_jet(&map, phi);
                            v[0] * n[0] + v[1] * n[1]
                        })
                        .collect();
                    for j in 0..=k {
                        for (c, tr) in traces.iter().enumerate() {
                            m[(row + j, c)] += w * tr * p[j];
                        }
                        rhs[row + j] += w * avg * p[j];
                    }
                }
                row += k + 1;
            }
            let it = map.inverse_transpose;
            for (q, xr) in vol.points.iter().enumerate() {
                let w = vol.weights[q] * map.det.abs();
                let tab = basis.tabulate_2d(*xr);
                let (u, _, _) = field.eval_tabulated(&map, &tab, t);
                let vals: Vec<[f64; 2]> = tab.iter().map(|phi| piola_jet(&map, phi).0).collect();
                for (i, qf) in ned.iter().enumerate() {
                    let qh = nedelec_eval(*qf, *xr);
                    let qp = [it[0][0] * qh[0] + it[0][1] * qh[1], it[1][0] * qh[0] + it[1][1] * qh[1]];
                    for (c, v) in vals.iter().enumerate() {
                        m[(row + i, c)] += w * (v[0] * qp[0] + v[1] * qp[1]);
                    }
                    rhs[row + i] += w * (u[0] * qp[0] + u[1] * qp[1]);
                }
            }
            debug_assert_eq!(row + ned.len(), nb);
            m.lu().solve(&rhs).map(|c| c.as_slice().to_vec()).ok_or(HdgError::SingularMomentSystem(t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VelocityField { k, element_coeffs: coeffs, facet_coeffs: field.facet_coeffs.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_dof_map;
    use crate::mesh::unit_square_mesh;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sym_err(m: &DMatrix<f64>) -> f64 {
        (m - m.transpose()).amax() / m.amax()
    }

    #[test]
    fn local_matrices_are_symmetric() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 3, ConformityMode::Relaxed, 0.7, DEFAULT_LAMBDA).unwrap();
        for m in &s.local {
            assert!(sym_err(m) < 1e-13);
        }
    }

    #[test]
    fn viscous_form_vanishes_on_constants() {
        // a constant field with matching facet unknowns has zero energy
        let mesh = unit_square_mesh(1);
        let k = 2;
        let dm = build_dof_map(&mesh, k, ConformityMode::Full).unwrap();
        let tabs = ReferenceTables::new(&dm, 2 * k + 6, 2 * k + 2);
        let c = [0.3, -0.8];
        for t in 0..mesh.n_elements() {
            let a = element_viscous_matrix(&mesh, &dm, &tabs, t, ViscousWeights::stokes(1.0, 4.0, k)).unwrap();
            // interpolate the constant in the local velocity functions by least squares
            let map = mesh.element_map(t).unwrap();
            let nv = dm.n_vel_local();
            let mut g = DMatrix::zeros(nv, nv);
            let mut r = DVector::zeros(nv);
            for (q, row) in tabs.vol.iter().enumerate() {
                let w = tabs.vol_rule.weights[q];
                let v: Vec<[f64; 2]> = (0..nv).map(|a| piola_jet(&map, &row[dm.vel_funcs[a]]).0.map(|x| x * dm.elements[t].sign[a])).collect();
                for i in 0..nv {
                    r[i] += w * (v[i][0] * c[0] + v[i][1] * c[1]);
                    for j in 0..nv {
                        g[(i, j)] += w * (v[i][0] * v[j][0] + v[i][1] * v[j][1]);
                    }
                }
            }
            let coef = g.lu().solve(&r).unwrap();
            let mut x = DVector::zeros(nv + 3 * k);
            x.rows_mut(0, nv).copy_from(&coef);
            for lf in 0..3 {
                let tg = mesh.facets[mesh.element_facets[t][lf]].tangent;
                x[nv + lf * k] = c[0] * tg[0] + c[1] * tg[1];
            }
            let e = x.dot(&(&a * &x));
            assert!(e.abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn divergence_block_annihilates_solenoidal_functions() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 3, ConformityMode::Relaxed, 1.0, 4.0).unwrap();
        let dm = &s.dof_map;
        for m in &s.local {
            for (a, &fi) in dm.vel_funcs.iter().enumerate() {
                use crate::refbasis::ShapeKind::*;
                if matches!(dm.basis.functions[fi].kind, FacetHigh | CellDivFree) {
                    for i in 0..dm.n_pressure_local() {
                        assert!(m[(dm.pressure_local(i), a)].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_pressure_sees_no_divergence() {
        // Σ_T ∫_T div v = 0 for every v with vanishing low-order boundary flux
        for mode in [ConformityMode::Full, ConformityMode::Relaxed] {
            let mesh = unit_square_mesh(3);
            let s = StokesSystem::new(&mesh, 2, mode, 1.0, 4.0).unwrap();
            let b = s.divergence_dense();
            let x = DVector::from_vec(random(s.dof_map.n_free(), 3));
            let mut ones = DVector::zeros(s.dof_map.n_free());
            for t in 0..mesh.n_elements() {
                ones[s.dof_map.pressure_const_index(t)] = 1.0;
            }
            assert!(ones.dot(&(&b * &x)).abs() < 1e-11);
        }
    }

    #[test]
    fn reconstruction_requires_relaxed() {
        let mesh = unit_square_mesh(1);
        let dm = build_dof_map(&mesh, 2, ConformityMode::Full).unwrap();
        assert!(matches!(build_reconstruction(&dm), Err(HdgError::RequiresRelaxed)));
    }

    #[test]
    fn reconstruction_is_a_projection() {
        let mesh = unit_square_mesh(2);
        let dm = build_dof_map(&mesh, 2, ConformityMode::Relaxed).unwrap();
        let r = build_reconstruction(&dm).unwrap();
        let x = random(dm.n_free(), 2);
        let y = r.apply(&x);
        assert_eq!(r.apply(&y), y);
        // triplets agree with apply
        let mut z = vec![0.0; dm.n_free()];
        for (i, j, v) in r.triplets() {
            z[i] += v * x[j];
        }
        for (a, b) in z.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
        // transpose identity <R x, b> = <x, Rᵀ b>
        let b = random(dm.n_free(), 9);
        let lhs: f64 = y.iter().zip(&b).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&r.apply_transpose(&b)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn reconstructed_field_is_normal_continuous() {
        let mesh = unit_square_mesh(2);
        let k = 3;
        let dm = build_dof_map(&mesh, k, ConformityMode::Relaxed).unwrap();
        let r = build_reconstruction(&dm).unwrap();
        let u = VelocityField::from_global(&mesh, &dm, &r.apply(&random(dm.n_free(), 4)));
        for f in &mesh.facets {
            for s in [-0.7, 0.1, 0.9] {
                let (ul, _, _) = u.eval(&mesh, &dm.basis, f.left, facet_ref_point(f.local_left, s));
                let ur = match f.right {
                    Some(rt) => u.eval(&mesh, &dm.basis, rt, facet_ref_point(f.local_right.unwrap(), s)).0,
                    None => [0.0; 2],
                };
                let j = (ul[0] - ur[0]) * f.normal[0] + (ul[1] - ur[1]) * f.normal[1];
                assert!(j.abs() < 1e-11);
            }
        }
    }

    #[test]
    fn bdm_reproduces_conforming_fields() {
        let mesh = unit_square_mesh(2);
        let k = 3;
        let dm = build_dof_map(&mesh, k, ConformityMode::Full).unwrap();
        let u = VelocityField::from_global(&mesh, &dm, &random(dm.n_free(), 7));
        let v = bdm_interpolate(&mesh, &dm, &u).unwrap();
        for (a, b) in u.element_coeffs.iter().zip(&v.element_coeffs) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pr_rhs_differs_only_on_split_unknowns() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 2, ConformityMode::Relaxed, 1.0, 4.0).unwrap();
        let f = |x: [f64; 2]| [x[1].sin(), x[0] * x[0]];
        let b = rhs_basic(&s, &f).unwrap();
        let p = rhs_pr(&s, &f).unwrap();
        for (g, c) in s.dof_map.classes.iter().enumerate() {
            if !matches!(c, crate::fespace::DofClass::LocalSplitFacet { .. }) {
                assert_eq!(b[g], p[g]);
            }
        }
    }
}
