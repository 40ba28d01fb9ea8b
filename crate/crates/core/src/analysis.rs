//! Manufactured solution, error norms, convergence tables, viscosity sweeps
//! and cost accounting.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{bdm_interpolate, build_reconstruction, element_viscous_matrix, StokesSystem, ViscousWeights};
use crate::error::{HdgError, Result};
use crate::fespace::{build_dof_map, facet_ref_point, pressure_reference, ConformityMode, FacetProjection, VelocityField};
use crate::mesh::{unit_square_mesh, Mesh};
use crate::polyquad::simplex_quadrature;
use crate::refbasis::monomial_exponents;
use crate::solver::{check_viscous_definite, reconstruct_solution, solve_variant, Solution, SolveStats, Variant};

/// Stream-function solution on the unit square with `ζ = g(x) g(y)`,
/// `g(s) = s²(s-1)²`, and pressure `x⁵ + y⁵ - 1/3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub nu: f64,
}

fn g0(s: f64) -> f64 {
    s * s * (s - 1.0) * (s - 1.0)
}
fn g1(s: f64) -> f64 {
    4.0 * s * s * s - 6.0 * s * s + 2.0 * s
}
fn g2(s: f64) -> f64 {
    12.0 * s * s - 12.0 * s + 2.0
}
fn g3(s: f64) -> f64 {
    24.0 * s - 12.0
}

impl ManufacturedCase {
    pub fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        [g0(x) * g1(y), -g1(x) * g0(y)]
    }

    /// `G[c][i] = ∂_i u_c`.
    pub fn velocity_gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = p;
        [[g1(x) * g1(y), g0(x) * g2(y)], [-g2(x) * g0(y), -g1(x) * g1(y)]]
    }

    pub fn pressure(&self, p: [f64; 2]) -> f64 {
        p[0].powi(5) + p[1].powi(5) - 1.0 / 3.0
    }

    pub fn laplacian(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        [g2(x) * g1(y) + g0(x) * g3(y), -g3(x) * g0(y) - g1(x) * g2(y)]
    }

    /// `f = -νΔu + ∇p`, the load for which the discrete pressure approximates `p`.
    pub fn force(&self, p: [f64; 2]) -> [f64; 2] {
        let l = self.laplacian(p);
        [-self.nu * l[0] + 5.0 * p[0].powi(4), -self.nu * l[1] + 5.0 * p[1].powi(4)]
    }
}

pub fn manufactured_case(nu: f64) -> ManufacturedCase {
    ManufacturedCase { nu }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorReport {
    pub l2_velocity: f64,
    pub h1_broken_velocity: f64,
    pub l2_pressure: f64,
    pub div_l2: f64,
    /// Full normal jumps; on the boundary the normal trace itself.
    pub normal_jump_l2: f64,
    /// Normal jumps projected onto `P^{k-1}(F)`.
    pub projected_normal_jump_l2: f64,
    /// `(Σ_T Σ_F h_F⁻¹ ‖Π(u_T·t - u_F)‖²)^{1/2}` of the discrete field.
    pub tangential_jump_norm: f64,
    /// `|||u - u_h|||₁`.
    pub energy_error: f64,
    pub dofs: usize,
    pub gdofs: usize,
    pub nze: usize,
}

/// Pointwise access to a (discrete or exact) velocity-pressure pair.
pub trait FieldView: Sync {
    /// Value, Jacobian and divergence on element `t` at reference point `xr`
    /// (physical point `x`).
    fn velocity(&self, t: usize, xr: [f64; 2], x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], f64);
    fn pressure(&self, t: usize, xr: [f64; 2], x: [f64; 2]) -> f64;
    /// Facet tangential unknown at parameter `s` (physical point `x`).
    fn facet_tangential(&self, facet: usize, s: f64, x: [f64; 2]) -> f64;
}

pub struct SolutionView<'a> {
    pub system: &'a StokesSystem,
    pub solution: &'a Solution,
}

impl FieldView for SolutionView<'_> {
    fn velocity(&self, t: usize, xr: [f64; 2], _x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], f64) {
        self.solution.velocity.eval(&self.system.mesh, &self.system.dof_map.basis, t, xr)
    }

    fn pressure(&self, t: usize, xr: [f64; 2], _x: [f64; 2]) -> f64 {
        let dm = &self.system.dof_map;
        dm.pressure_indices.iter().zip(&self.solution.pressure[t]).map(|(&(i, j), c)| c * pressure_reference(i, j, xr)).sum()
    }

    fn facet_tangential(&self, facet: usize, s: f64, _x: [f64; 2]) -> f64 {
        self.solution.velocity.facet_value(facet, s)
    }
}

/// The manufactured solution viewed as a discrete field.
pub struct ExactView<'a> {
    pub case: &'a ManufacturedCase,
    pub mesh: &'a Mesh,
}

impl FieldView for ExactView<'_> {
    fn velocity(&self, _t: usize, _xr: [f64; 2], x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let g = self.case.velocity_gradient(x);
        (self.case.velocity(x), g, g[0][0] + g[1][1])
    }

    fn pressure(&self, _t: usize, _xr: [f64; 2], x: [f64; 2]) -> f64 {
        self.case.pressure(x)
    }

    fn facet_tangential(&self, facet: usize, _s: f64, x: [f64; 2]) -> f64 {
        let t = self.mesh.facets[facet].tangent;
        let u = self.case.velocity(x);
        u[0] * t[0] + u[1] * t[1]
    }
}

fn error_degree(k: usize) -> usize {
    2 * k.max(7)
}

/// Error norms of `view` against the manufactured solution.
pub fn compute_errors_of(mesh: &Mesh, k: usize, view: &dyn FieldView, case: &ManufacturedCase) -> Result<ErrorReport> {
    let rule = simplex_quadrature::<2>(error_degree(k))?;
    let vol = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = mesh.element_map(t)?;
            let jac = map.det.abs();
            let mut acc = [0.0; 4];
            for (xr, w) in rule.iter() {
                let x = map.apply(*xr);
                let (uh, gh, dh) = view.velocity(t, *xr, x);
                let u = case.velocity(x);
                let g = case.velocity_gradient(x);
                let ph = view.pressure(t, *xr, x);
                let w = w * jac;
                acc[0] += w * ((u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2));
                acc[1] += w * (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (g[i][j] - gh[i][j]).powi(2)).sum::<f64>();
                acc[2] += w * (case.pressure(x) - ph).powi(2);
                acc[3] += w * dh * dh;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let proj = FacetProjection::new(k, error_degree(k));
    let fac = (0..mesh.facets.len())
        .into_par_iter()
        .map(|fid| {
            let f = &mesh.facets[fid];
            let mut sides = vec![(f.left, f.local_left)];
            if let Some(r) = f.right {
                sides.push((r, f.local_right.unwrap()));
            }
            let nq = proj.rule.len();
            let mut jump = vec![0.0; nq];
            let mut tang = vec![vec![0.0; nq]; sides.len()];
            for (q, s) in proj.rule.points.iter().enumerate() {
                let x = f.point(mesh, s[0]);
                let uf = view.facet_tangential(fid, s[0], x);
                for (side, &(t, lf)) in sides.iter().enumerate() {
                    let (u, _, _) = view.velocity(t, facet_ref_point(lf, s[0]), x);
                    let un = u[0] * f.normal[0] + u[1] * f.normal[1];
                    jump[q] += if side == 0 { un } else { -un };
                    tang[side][q] = u[0] * f.tangent[0] + u[1] * f.tangent[1] - uf;
                }
            }
            let w = |q: usize| proj.rule.weights[q] * f.length / 2.0;
            let full: f64 = (0..nq).map(|q| w(q) * jump[q] * jump[q]).sum();
            let pmass = |c: &[f64]| -> f64 { c.iter().enumerate().map(|(j, c)| c * c * FacetProjection::mass(f.length, j)).sum() };
            let projected = pmass(&proj.project(&jump));
            let tj: f64 = tang.iter().map(|tv| pmass(&proj.project(tv)) / f.length).sum();
            [full, projected, tj]
        })
        .collect::<Vec<_>>();
    let sum = |i: usize| vol.iter().map(|a| a[i]).sum::<f64>();
    let fsum = |i: usize| fac.iter().map(|a| a[i]).sum::<f64>();
    let h1 = sum(1);
    let tj = fsum(2);
    Ok(ErrorReport {
        l2_velocity: sum(0).sqrt(),
        h1_broken_velocity: h1.sqrt(),
        l2_pressure: sum(2).sqrt(),
        div_l2: sum(3).sqrt(),
        normal_jump_l2: fsum(0).sqrt(),
        projected_normal_jump_l2: fsum(1).sqrt(),
        tangential_jump_norm: tj.sqrt(),
        energy_error: (h1 + tj).sqrt(),
        ..Default::default()
    })
}

pub fn compute_errors(system: &StokesSystem, solution: &Solution, case: &ManufacturedCase) -> Result<ErrorReport> {
    let view = SolutionView { system, solution };
    let mut r = compute_errors_of(&system.mesh, system.k(), &view, case)?;
    r.dofs = solution.stats.dofs;
    r.gdofs = solution.stats.gdofs;
    r.nze = solution.stats.nze;
    Ok(r)
}

/// `|||u|||₁` of a vector of free unknowns.
pub fn discrete_energy_norm(system: &StokesSystem, x: &[f64]) -> Result<f64> {
    let dm = &system.dof_map;
    let parts = (0..system.mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let m = element_viscous_matrix(&system.mesh, dm, &system.tables, t, ViscousWeights::energy_norm())?;
            let g = &dm.elements[t].global;
            let v: Vec<f64> = (0..m.nrows()).map(|i| g[i].map_or(0.0, |gi| x[gi])).collect();
            let mut s = 0.0;
            for i in 0..v.len() {
                for j in 0..v.len() {
                    s += v[i] * m[(i, j)] * v[j];
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub elements: usize,
    pub report: ErrorReport,
    pub rate_l2_u: Option<f64>,
    pub rate_h1_u: Option<f64>,
    pub rate_l2_p: Option<f64>,
    pub rate_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn last(&self) -> &ConvergenceRow {
        self.rows.last().expect("non-empty table")
    }
}

/// `log₂(e_prev / e)`; `None` when either error is not positive.
pub fn rate(prev: f64, next: f64) -> Option<f64> {
    (prev > 0.0 && next > 0.0).then(|| (prev / next).log2())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyConfig {
    pub k: usize,
    pub mode: ConformityMode,
    pub variant: Variant,
    pub reconstruct: bool,
    /// Number of meshes; the first has `n0` subdivisions per side.
    pub levels: usize,
    pub n0: usize,
    pub nu: f64,
    pub lambda: f64,
    pub reduced: bool,
}

fn validate(k: usize, mode: ConformityMode, variant: Variant) -> Result<()> {
    if k < 1 {
        return Err(HdgError::InvalidOrder(k));
    }
    if mode == ConformityMode::Full && variant == Variant::PressureRobust {
        return Err(HdgError::InvalidConfig("the pr variant requires relaxed mode".into()));
    }
    Ok(())
}

/// Assembles, solves and (optionally) reconstructs on one mesh.
pub fn solve_case(mesh: &Mesh, cfg: &StudyConfig) -> Result<(StokesSystem, Solution)> {
    validate(cfg.k, cfg.mode, cfg.variant)?;
    let case = manufactured_case(cfg.nu);
    let system = StokesSystem::with_reduction(mesh, cfg.k, cfg.mode, cfg.nu, cfg.lambda, cfg.reduced)?;
    let f = |x: [f64; 2]| case.force(x);
    let mut sol = solve_variant(&system, &f, cfg.variant)?;
    if cfg.reconstruct {
        sol = reconstruct_solution(&system, &sol)?;
    }
    Ok((system, sol))
}

/// Startup check of the penalty on the unit square with `n` subdivisions,
/// capped at 4 to keep the dense factorization small.
pub fn check_penalty(k: usize, mode: ConformityMode, lambda: f64, n: usize) -> Result<()> {
    check_viscous_definite(&StokesSystem::new(&unit_square_mesh(n.clamp(1, 4)), k, mode, 1.0, lambda)?)
}

pub fn convergence_study(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    if cfg.levels < 1 || cfg.n0 < 1 {
        return Err(HdgError::InvalidConfig("levels and mesh size must be at least 1".into()));
    }
    if !(cfg.nu > 0.0) {
        return Err(HdgError::InvalidConfig("viscosity must be positive".into()));
    }
    validate(cfg.k, cfg.mode, cfg.variant)?;
    check_penalty(cfg.k, cfg.mode, cfg.lambda, cfg.n0)?;
    let case = manufactured_case(cfg.nu);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut mesh = unit_square_mesh(cfg.n0);
    for level in 0..cfg.levels {
        if level > 0 {
            mesh = mesh.refine();
        }
        let (system, sol) = solve_case(&mesh, cfg)?;
        let report = compute_errors(&system, &sol, &case)?;
        let prev = rows.last().map(|r| r.report);
        let r = |f: fn(&ErrorReport) -> f64| prev.and_then(|p| rate(f(&p), f(&report)));
        rows.push(ConvergenceRow {
            level,
            h: mesh.max_h(),
            elements: mesh.n_elements(),
            report,
            rate_l2_u: r(|e| e.l2_velocity),
            rate_h1_u: r(|e| e.h1_broken_velocity),
            rate_l2_p: r(|e| e.l2_pressure),
            rate_energy: r(|e| e.energy_error),
        });
    }
    Ok(ConvergenceTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuSweepRow {
    pub nu: f64,
    pub basic_h1: f64,
    pub pr_h1: f64,
    pub basic_l2: f64,
    pub pr_l2: f64,
}

/// Basic and pressure-robust errors on one Relaxed-mode mesh per viscosity.
pub fn nu_sweep(k: usize, n: usize, nus: &[f64], lambda: f64) -> Result<Vec<NuSweepRow>> {
    check_penalty(k, ConformityMode::Relaxed, lambda, n)?;
    let mesh = unit_square_mesh(n);
    nus.iter()
        .map(|&nu| {
            let case = manufactured_case(nu);
            let system = StokesSystem::new(&mesh, k, ConformityMode::Relaxed, nu, lambda)?;
            let f = |x: [f64; 2]| case.force(x);
            let b = compute_errors(&system, &solve_variant(&system, &f, Variant::Basic)?, &case)?;
            let p = compute_errors(&system, &solve_variant(&system, &f, Variant::PressureRobust)?, &case)?;
            Ok(NuSweepRow { nu, basic_h1: b.h1_broken_velocity, pr_h1: p.h1_broken_velocity, basic_l2: b.l2_velocity, pr_l2: p.l2_velocity })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Costs {
    pub dofs: usize,
    pub gdofs: usize,
    pub nze: usize,
}

impl From<SolveStats> for Costs {
    fn from(s: SolveStats) -> Self {
        Self { dofs: s.dofs, gdofs: s.gdofs, nze: s.nze }
    }
}

/// Unknown counts and the condensed sparsity pattern, without assembly.
pub fn count_costs(mesh: &Mesh, k: usize, mode: ConformityMode) -> Result<Costs> {
    let dm = build_dof_map(mesh, k, mode)?;
    let off = dm.local_offset();
    let mut pattern = HashSet::new();
    for (t, e) in dm.elements.iter().enumerate() {
        let ext: Vec<usize> = e.global.iter().flatten().copied().filter(|&g| g < off).collect();
        for &a in &ext {
            for &b in &ext {
                pattern.insert((a, b));
            }
        }
        let p = dm.pressure_const_index(t);
        pattern.insert((off, p));
        pattern.insert((p, off));
    }
    Ok(Costs { dofs: dm.dofs(), gdofs: dm.gdofs(), nze: pattern.len() })
}

/// Measured properties of the averaging reconstruction on one field:
/// maximum normal jump of `R u` (boundary traces included), maximum change
/// of facet moments below order `k` and of volume moments against
/// `[P^{k-2}]²`, energy ratio `|||R u|||₁ / |||u|||₁`, and maximum
/// difference of the same preserved moments between `R u` and the BDM oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionCheck {
    pub conformity: f64,
    pub facet_moments: f64,
    pub volume_moments: f64,
    pub stability: f64,
    pub bdm_agreement: f64,
}

/// Facet normal moments (`j < k`) and volume moments of one element.
fn preserved_moments(mesh: &Mesh, system: &StokesSystem, u: &VelocityField, t: usize) -> Result<Vec<f64>> {
    let basis = &system.dof_map.basis;
    let k = basis.k;
    let map = mesh.element_map(t)?;
    let proj = FacetProjection::new(k, 2 * k + 2);
    let mut out = Vec::new();
    for lf in 0..3 {
        let n = mesh.outward_normal(t, lf);
        let vals: Vec<f64> = proj
            .rule
            .points
            .iter()
            .map(|s| {
                let (v, _, _) = u.eval(mesh, basis, t, facet_ref_point(lf, s[0]));
                v[0] * n[0] + v[1] * n[1]
            })
            .collect();
        out.extend(proj.project(&vals));
    }
    if k >= 2 {
        let rule = simplex_quadrature::<2>(2 * k)?;
        for e in monomial_exponents(2, k - 2) {
            for c in 0..2 {
                let m: f64 = rule
                    .iter()
                    .map(|(xr, w)| {
                        let (v, _, _) = u.eval(mesh, basis, t, *xr);
                        w * v[c] * xr[0].powi(e[0] as i32) * xr[1].powi(e[1] as i32)
                    })
                    .sum();
                out.push(m * map.det.abs());
            }
        }
    }
    Ok(out)
}

pub fn check_reconstruction(system: &StokesSystem, x: &[f64]) -> Result<ReconstructionCheck> {
    let mesh = &system.mesh;
    let dm = &system.dof_map;
    let r = build_reconstruction(dm)?;
    let rx = r.apply(x);
    let u = VelocityField::from_global(mesh, dm, x);
    let ru = VelocityField::from_global(mesh, dm, &rx);
    let bdm = bdm_interpolate(mesh, dm, &u)?;
    let mut conformity: f64 = 0.0;
    for f in &mesh.facets {
        for s in [-0.9, -0.4, 0.0, 0.55, 0.95] {
            let (a, _, _) = ru.eval(mesh, &dm.basis, f.left, facet_ref_point(f.local_left, s));
            let b = match f.right {
                Some(rt) => ru.eval(mesh, &dm.basis, rt, facet_ref_point(f.local_right.unwrap(), s)).0,
                None => [0.0; 2],
            };
            conformity = conformity.max(((a[0] - b[0]) * f.normal[0] + (a[1] - b[1]) * f.normal[1]).abs());
        }
    }
    let k = dm.k;
    let mut facet_moments: f64 = 0.0;
    let mut volume_moments: f64 = 0.0;
    let mut bdm_agreement: f64 = 0.0;
    for t in 0..mesh.n_elements() {
        let m0 = preserved_moments(mesh, system, &u, t)?;
        let m1 = preserved_moments(mesh, system, &ru, t)?;
        let m2 = preserved_moments(mesh, system, &bdm, t)?;
        for (i, ((a, b), c)) in m0.iter().zip(&m1).zip(&m2).enumerate() {
            if i < 3 * k {
                facet_moments = facet_moments.max((a - b).abs());
            } else {
                volume_moments = volume_moments.max((a - b).abs());
            }
            bdm_agreement = bdm_agreement.max((b - c).abs());
        }
    }
    let stability = discrete_energy_norm(system, &rx)? / discrete_energy_norm(system, x)?;
    Ok(ReconstructionCheck { conformity, facet_moments, volume_moments, stability, bdm_agreement })
}
