//! Static condensation, sparse solution of the condensed system, the
//! basic and pressure-robust variants, and spectral stability probes.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{build_reconstruction, rhs_basic, rhs_pr, StokesSystem};
use crate::error::{HdgError, Result};
use crate::fespace::{ConformityMode, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Basic,
    #[serde(rename = "pr")]
    PressureRobust,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::PressureRobust => "pr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SolveStats {
    /// All unknowns, constrained ones included.
    pub dofs: usize,
    /// Unknowns of the condensed system, multiplier included.
    pub gdofs: usize,
    /// Stored entries of the condensed matrix.
    pub nze: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Free unknowns in global order.
    pub x: Vec<f64>,
    pub multiplier: f64,
    pub velocity: VelocityField,
    /// Pressure coefficients per element, in local pressure order.
    pub pressure: Vec<Vec<f64>>,
    pub stats: SolveStats,
    pub variant: Variant,
    pub reconstructed: bool,
}

struct CondensedElement {
    ext: Vec<(usize, usize)>,
    int: Vec<(usize, usize)>,
    /// `K_II⁻¹ K_IE`
    x: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    kei: DMatrix<f64>,
}

/// The condensed (Schur complement) system and the data to recover the
/// eliminated unknowns.
pub struct Condensed {
    elements: Vec<CondensedElement>,
    pub matrix: SparseColMat<usize, f64>,
    lu: Lu<usize, f64>,
    n_ext: usize,
    pub stats: SolveStats,
}

/// Eliminates element-local unknowns and factors the condensed matrix.
pub fn condense(system: &StokesSystem) -> Result<Condensed> {
    let dm = &system.dof_map;
    let off = dm.local_offset();
    let elements = system
        .local
        .par_iter()
        .enumerate()
        .map(|(t, m)| {
            let mut ext = Vec::new();
            let mut int = Vec::new();
            for (i, g) in dm.elements[t].global.iter().enumerate() {
                match g {
                    Some(g) if *g < off => ext.push((i, *g)),
                    Some(g) => int.push((i, *g)),
                    None => {}
                }
            }
            let kii = DMatrix::from_fn(int.len(), int.len(), |r, c| m[(int[r].0, int[c].0)]);
            let kie = DMatrix::from_fn(int.len(), ext.len(), |r, c| m[(int[r].0, ext[c].0)]);
            let kei = kie.transpose();
            let lu = kii.lu();
            let x = lu.solve(&kie).ok_or(HdgError::SingularLocalBlock(t))?;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(HdgError::SingularLocalBlock(t));
            }
            Ok(CondensedElement { ext, int, x, lu, kei })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = off + 1;
    let mut trips = Vec::new();
    for (t, ce) in elements.iter().enumerate() {
        let m = &system.local[t];
        let s = &ce.kei * &ce.x;
        for (a, &(ia, ga)) in ce.ext.iter().enumerate() {
            for (b, &(ib, gb)) in ce.ext.iter().enumerate() {
                trips.push(Triplet::new(ga, gb, m[(ia, ib)] - s[(a, b)]));
            }
        }
        let p = dm.pressure_const_index(t);
        trips.push(Triplet::new(off, p, system.areas[t]));
        trips.push(Triplet::new(p, off, system.areas[t]));
    }
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| HdgError::SolverBreakdown(format!("{e:?}")))?;
    let lu = matrix.sp_lu().map_err(|e| HdgError::SolverBreakdown(format!("{e:?}")))?;
    let stats = SolveStats { dofs: dm.dofs(), gdofs: n, nze: matrix.compute_nnz() };
    Ok(Condensed { elements, matrix, lu, n_ext: off, stats })
}

impl Condensed {
    /// Solves for all free unknowns and the multiplier given a load vector
    /// over the free unknowns.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.n_ext + 1;
        let locals: Vec<DVector<f64>> = self
            .elements
            .par_iter()
            .map(|ce| {
                let bi = DVector::from_iterator(ce.int.len(), ce.int.iter().map(|&(_, g)| rhs[g]));
                self_solve(&ce.lu, &bi)
            })
            .collect();
        let mut g = Mat::<f64>::zeros(n, 1);
        for i in 0..self.n_ext {
            g[(i, 0)] = rhs[i];
        }
        for (ce, y) in self.elements.iter().zip(&locals) {
            let c = &ce.kei * y;
            for (a, &(_, ga)) in ce.ext.iter().enumerate() {
                g[(ga, 0)] -= c[a];
            }
        }
        self.lu.solve_in_place(g.as_mut());
        if !(0..n).all(|i| g[(i, 0)].is_finite()) {
            return Err(HdgError::SolverBreakdown("non-finite condensed solution".into()));
        }
        let mut x = vec![0.0; rhs.len()];
        for (i, xi) in x.iter_mut().enumerate().take(self.n_ext) {
            *xi = g[(i, 0)];
        }
        for (ce, y) in self.elements.iter().zip(&locals) {
            let xe = DVector::from_iterator(ce.ext.len(), ce.ext.iter().map(|&(_, gi)| g[(gi, 0)]));
            let xi = y - &ce.x * xe;
            for (a, &(_, gi)) in ce.int.iter().enumerate() {
                x[gi] = xi[a];
            }
        }
        Ok((x, g[(self.n_ext, 0)]))
    }
}

fn self_solve(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: &DVector<f64>) -> DVector<f64> {
    lu.solve(b).unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN))
}

/// Solves the monolithic saddle-point system directly.
pub fn solve_monolithic(system: &StokesSystem, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = system.n_unknowns();
    let trips: Vec<_> = system.monolithic_triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| HdgError::SolverBreakdown(format!("{e:?}")))?;
    let lu = m.sp_lu().map_err(|e| HdgError::SolverBreakdown(format!("{e:?}")))?;
    let mut b = Mat::<f64>::zeros(n, 1);
    for (i, v) in rhs.iter().enumerate() {
        b[(i, 0)] = *v;
    }
    lu.solve_in_place(b.as_mut());
    let x: Vec<f64> = (0..n - 1).map(|i| b[(i, 0)]).collect();
    Ok((x, b[(n - 1, 0)]))
}

fn package(system: &StokesSystem, x: Vec<f64>, multiplier: f64, stats: SolveStats, variant: Variant) -> Solution {
    let dm = &system.dof_map;
    let velocity = VelocityField::from_global(&system.mesh, dm, &x);
    let pressure = dm
        .elements
        .iter()
        .map(|e| (0..dm.n_pressure_local()).map(|m| e.global[dm.pressure_local(m)].map_or(0.0, |g| x[g])).collect())
        .collect();
    Solution { x, multiplier, velocity, pressure, stats, variant, reconstructed: false }
}

/// Solves with a given load vector over the free unknowns.
pub fn solve_with_rhs(system: &StokesSystem, rhs: &[f64], variant: Variant) -> Result<Solution> {
    let c = condense(system)?;
    let (x, mu) = c.solve(rhs)?;
    Ok(package(system, x, mu, c.stats, variant))
}

pub fn solve_basic(system: &StokesSystem, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Result<Solution> {
    solve_with_rhs(system, &rhs_basic(system, f)?, Variant::Basic)
}

/// Pressure-robust variant: the load is tested with reconstructed test functions.
pub fn solve_pr(system: &StokesSystem, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Result<Solution> {
    solve_with_rhs(system, &rhs_pr(system, f)?, Variant::PressureRobust)
}

pub fn solve_variant(system: &StokesSystem, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync), variant: Variant) -> Result<Solution> {
    match variant {
        Variant::Basic => solve_basic(system, f),
        Variant::PressureRobust => solve_pr(system, f),
    }
}

/// Applies the averaging reconstruction to the velocity of a solution.
/// The identity in Full mode, whose velocities are already conforming.
pub fn reconstruct_solution(system: &StokesSystem, solution: &Solution) -> Result<Solution> {
    if system.mode() == ConformityMode::Full {
        let mut s = solution.clone();
        s.reconstructed = true;
        return Ok(s);
    }
    let r = build_reconstruction(&system.dof_map)?;
    let mut s = package(system, r.apply(&solution.x), solution.multiplier, solution.stats, solution.variant);
    s.reconstructed = true;
    Ok(s)
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `(L⁻¹ A L⁻ᵀ)` for `N = L Lᵀ`.
fn congruence(a: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = n.clone().cholesky().ok_or_else(|| HdgError::SolverBreakdown("norm matrix not positive definite".into()))?.unpack();
    let y = l.solve_lower_triangular(a).ok_or_else(|| HdgError::SolverBreakdown("triangular solve".into()))?;
    let z = l.solve_lower_triangular(&y.transpose()).ok_or_else(|| HdgError::SolverBreakdown("triangular solve".into()))?;
    Ok((&z + z.transpose()) * 0.5)
}

/// Smallest generalized eigenvalue of `A/ν` against the energy-norm matrix
/// on the free velocity unknowns.
pub fn coercivity_constant(system: &StokesSystem) -> Result<f64> {
    let vel = system.velocity_indices();
    let a = submatrix(&system.viscous_dense(), &vel, &vel) / system.nu;
    let n = submatrix(&system.energy_norm_dense()?, &vel, &vel);
    let c = congruence(&a, &n)?;
    Ok(c.symmetric_eigenvalues().min())
}

/// Fails unless `A` on the free velocity unknowns is positive definite.
pub fn check_viscous_definite(system: &StokesSystem) -> Result<()> {
    let vel = system.velocity_indices();
    match submatrix(&system.viscous_dense(), &vel, &vel).cholesky() {
        Some(_) => Ok(()),
        None => Err(HdgError::InvalidConfig(format!("penalty λ = {} leaves the viscous block indefinite for k = {}", system.lambda, system.k()))),
    }
}

/// Discrete inf-sup constant against the energy norm and the L² norm of
/// mean-free pressures.
pub fn inf_sup_constant(system: &StokesSystem) -> Result<f64> {
    let vel = system.velocity_indices();
    let pre = system.pressure_indices();
    let n = submatrix(&system.energy_norm_dense()?, &vel, &vel);
    let b = submatrix(&system.divergence_dense(), &pre, &vel);
    let nchol = n.cholesky().ok_or_else(|| HdgError::SolverBreakdown("norm matrix not positive definite".into()))?;
    let s = &b * nchol.solve(&b.transpose());
    let mp = pressure_mass_dense(system, &pre);
    let c = congruence(&s, &mp)?;
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    // the constant pressure spans the kernel
    Ok(ev.get(1).copied().unwrap_or(0.0).max(0.0).sqrt())
}

fn pressure_mass_dense(system: &StokesSystem, pre: &[usize]) -> DMatrix<f64> {
    let dm = &system.dof_map;
    let tabs = &system.tables;
    let mut pos = vec![usize::MAX; dm.n_free()];
    for (i, &g) in pre.iter().enumerate() {
        pos[g] = i;
    }
    let mut m = DMatrix::zeros(pre.len(), pre.len());
    for t in 0..system.mesh.n_elements() {
        let jac = 2.0 * system.areas[t];
        let gl: Vec<usize> = (0..dm.n_pressure_local()).map(|i| pos[dm.elements[t].global[dm.pressure_local(i)].unwrap()]).collect();
        for (q, row) in tabs.pressure.iter().enumerate() {
            let w = tabs.vol_rule.weights[q] * jac;
            for (i, a) in row.iter().enumerate() {
                for (j, b) in row.iter().enumerate() {
                    m[(gl[i], gl[j])] += w * a * b;
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{default_lambda, DEFAULT_LAMBDA};
    use crate::mesh::unit_square_mesh;

    fn forcing(x: [f64; 2]) -> [f64; 2] {
        [(2.0 * x[1]).cos() + x[0], x[0] * x[1] - 1.0]
    }

    #[test]
    fn condensed_matches_monolithic() {
        let mesh = unit_square_mesh(3);
        for mode in [ConformityMode::Full, ConformityMode::Relaxed] {
            let s = StokesSystem::new(&mesh, 2, mode, 0.5, DEFAULT_LAMBDA).unwrap();
            let b = rhs_basic(&s, &forcing).unwrap();
            let (xc, mc) = condense(&s).unwrap().solve(&b).unwrap();
            let (xm, mm) = solve_monolithic(&s, &b).unwrap();
            let scale = xm.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let diff = xc.iter().zip(&xm).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(diff < 1e-9 * scale, "{mode:?}: {diff}");
            assert!((mc - mm).abs() < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn monolithic_residual_is_small() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 3, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA).unwrap();
        let b = rhs_basic(&s, &forcing).unwrap();
        let (x, mu) = condense(&s).unwrap().solve(&b).unwrap();
        let mut full = x.clone();
        full.push(mu);
        let mut r = b.clone();
        r.push(0.0);
        for (i, j, v) in s.monolithic_triplets() {
            r[i] -= v * full[j];
        }
        let res = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(res < 1e-10, "{res}");
    }

    #[test]
    fn discrete_mean_pressure_vanishes() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 2, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA).unwrap();
        let sol = solve_basic(&s, &forcing).unwrap();
        let mean: f64 = sol.pressure.iter().zip(&s.areas).map(|(p, a)| p[0] * a).sum();
        assert!(mean.abs() < 1e-12);
        assert!(sol.multiplier.abs() < 1e-9);
    }

    #[test]
    fn reduced_velocity_matches_full() {
        let mesh = unit_square_mesh(2);
        let full = StokesSystem::new(&mesh, 3, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA).unwrap();
        let red = StokesSystem::with_reduction(&mesh, 3, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA, true).unwrap();
        let a = solve_basic(&full, &forcing).unwrap();
        let b = solve_basic(&red, &forcing).unwrap();
        for (x, y) in a.velocity.element_coeffs.iter().flatten().zip(b.velocity.element_coeffs.iter().flatten()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        for (x, y) in a.pressure.iter().zip(&b.pressure) {
            assert!((x[0] - y[0]).abs() < 1e-9);
        }
        assert!(b.stats.nze <= a.stats.nze);
    }

    #[test]
    fn discrete_velocity_is_elementwise_solenoidal() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 2, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA).unwrap();
        let sol = solve_basic(&s, &forcing).unwrap();
        for t in 0..mesh.n_elements() {
            for p in [[0.0, 0.3], [-0.5, 0.2], [0.4, 0.1]] {
                assert!(sol.velocity.eval(&mesh, &s.dof_map.basis, t, p).2.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn default_penalty_is_coercive() {
        let mesh = unit_square_mesh(2);
        for k in 1..=3 {
            let s = StokesSystem::new(&mesh, k, ConformityMode::Relaxed, 1.0, default_lambda(k)).unwrap();
            let c = coercivity_constant(&s).unwrap();
            assert!(c > 0.05, "k={k}: {c}");
        }
    }

    #[test]
    fn small_penalty_loses_coercivity() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 2, ConformityMode::Relaxed, 1.0, 0.05).unwrap();
        assert!(coercivity_constant(&s).unwrap() < 0.0);
    }

    #[test]
    fn inf_sup_is_positive() {
        let mesh = unit_square_mesh(2);
        let s = StokesSystem::new(&mesh, 2, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA).unwrap();
        assert!(inf_sup_constant(&s).unwrap() > 0.05);
    }

    #[test]
    fn pr_requires_relaxed() {
        let mesh = unit_square_mesh(1);
        let s = StokesSystem::new(&mesh, 2, ConformityMode::Full, 1.0, DEFAULT_LAMBDA).unwrap();
        assert!(matches!(solve_pr(&s, &forcing), Err(HdgError::RequiresRelaxed)));
    }

    #[test]
    fn definiteness_check_matches_the_coercivity_sign() {
        let mesh = unit_square_mesh(2);
        let weak = StokesSystem::new(&mesh, 1, ConformityMode::Relaxed, 1.0, DEFAULT_LAMBDA).unwrap();
        assert!(matches!(check_viscous_definite(&weak), Err(HdgError::InvalidConfig(_))));
        let ok = StokesSystem::new(&mesh, 1, ConformityMode::Relaxed, 1.0, default_lambda(1)).unwrap();
        check_viscous_definite(&ok).unwrap();
    }
}
