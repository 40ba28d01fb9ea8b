//! Dropping the non-solenoidal cell functions and the non-constant
//! pressures leaves the discrete velocity unchanged.
use hdg_stokes::analysis::{discrete_energy_norm, manufactured_case};
use hdg_stokes::assembly::{default_lambda, StokesSystem};
use hdg_stokes::fespace::{ConformityMode, VelocityField};
use hdg_stokes::mesh::unit_square_mesh;
use hdg_stokes::solver::solve_basic;

fn main() -> hdg_stokes::Result<()> {
    let k = 2;
    let mesh = unit_square_mesh(4);
    let case = manufactured_case(1.0);
    let f = |x: [f64; 2]| case.force(x);
    let full = StokesSystem::new(&mesh, k, ConformityMode::Relaxed, 1.0, default_lambda(k))?;
    let reduced = StokesSystem::with_reduction(&mesh, k, ConformityMode::Relaxed, 1.0, default_lambda(k), true)?;
    let a = solve_basic(&full, &f)?;
    let b = solve_basic(&reduced, &f)?;
    // express the reduced velocity in the full numbering
    let mut x = vec![0.0; full.dof_map.n_free()];
    b.velocity.to_global(&full.dof_map, &mut x);
    let d: Vec<f64> = a.x.iter().zip(&x).map(|(p, q)| p - q).collect();
    let mut dv = vec![0.0; d.len()];
    VelocityField::from_global(&mesh, &full.dof_map, &d).to_global(&full.dof_map, &mut dv);
    println!("gdofs {} -> {}, nze {} -> {}", a.stats.gdofs, b.stats.gdofs, a.stats.nze, b.stats.nze);
    println!("|||u_full - u_reduced|||₁ = {:.2e}", discrete_energy_norm(&full, &dv)?);
    Ok(())
}
