//! One solve of the manufactured flow with static condensation, checked
//! against the monolithic system.
use hdg_stokes::analysis::{compute_errors, manufactured_case};
use hdg_stokes::assembly::{default_lambda, rhs_basic, StokesSystem};
use hdg_stokes::fespace::ConformityMode;
use hdg_stokes::mesh::unit_square_mesh;
use hdg_stokes::solver::{solve_basic, solve_monolithic};

fn main() -> hdg_stokes::Result<()> {
    let k = 3;
    let mesh = unit_square_mesh(8);
    let case = manufactured_case(1.0);
    let f = |x: [f64; 2]| case.force(x);
    for mode in [ConformityMode::Full, ConformityMode::Relaxed] {
        let system = StokesSystem::new(&mesh, k, mode, case.nu, default_lambda(k))?;
        let sol = solve_basic(&system, &f)?;
        let e = compute_errors(&system, &sol, &case)?;
        let (xm, _) = solve_monolithic(&system, &rhs_basic(&system, &f)?)?;
        let diff = sol.x.iter().zip(&xm).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        println!("{mode:?}: gdofs {} nze {}", e.gdofs, e.nze);
        println!("  ‖u-u_h‖ = {:.3e}  ‖∇(u-u_h)‖ = {:.3e}  ‖p-p_h‖ = {:.3e}", e.l2_velocity, e.h1_broken_velocity, e.l2_pressure);
        println!("  ‖[[u_h·n]]‖ = {:.3e}  condensed vs monolithic {diff:.1e}", e.normal_jump_l2);
    }
    Ok(())
}
