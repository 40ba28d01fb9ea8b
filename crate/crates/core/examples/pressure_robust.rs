//! Basic against pressure-robust velocity errors at small viscosity, and
//! the averaging post-processing to an exactly solenoidal velocity.
use hdg_stokes::analysis::{compute_errors, manufactured_case};
use hdg_stokes::assembly::{default_lambda, StokesSystem};
use hdg_stokes::fespace::ConformityMode;
use hdg_stokes::mesh::unit_square_mesh;
use hdg_stokes::solver::{reconstruct_solution, solve_basic, solve_pr};

fn main() -> hdg_stokes::Result<()> {
    let k = 2;
    let case = manufactured_case(1e-3);
    let f = |x: [f64; 2]| case.force(x);
    let system = StokesSystem::new(&unit_square_mesh(8), k, ConformityMode::Relaxed, case.nu, default_lambda(k))?;
    let basic = solve_basic(&system, &f)?;
    let pr = solve_pr(&system, &f)?;
    let eb = compute_errors(&system, &basic, &case)?;
    let ep = compute_errors(&system, &pr, &case)?;
    println!("‖∇(u-u_h)‖ basic {:.3e}  pr {:.3e}  ratio {:.1}", eb.h1_broken_velocity, ep.h1_broken_velocity, eb.h1_broken_velocity / ep.h1_broken_velocity);
    let rec = compute_errors(&system, &reconstruct_solution(&system, &pr)?, &case)?;
    println!("before averaging: ‖div‖ {:.1e}  ‖[[u·n]]‖ {:.1e}", ep.div_l2, ep.normal_jump_l2);
    println!("after averaging:  ‖div‖ {:.1e}  ‖[[u·n]]‖ {:.1e}  ‖∇(u-Ru_h)‖ {:.3e}", rec.div_l2, rec.normal_jump_l2, rec.h1_broken_velocity);
    Ok(())
}
