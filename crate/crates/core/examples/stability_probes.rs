//! Coercivity of the viscous form and the discrete inf-sup constant by
//! dense generalized eigensolves on small meshes.
use hdg_stokes::assembly::{default_lambda, StokesSystem};
use hdg_stokes::fespace::ConformityMode;
use hdg_stokes::mesh::unit_square_mesh;
use hdg_stokes::solver::{coercivity_constant, inf_sup_constant};

fn main() -> hdg_stokes::Result<()> {
    for k in 1..=3 {
        for n in [1, 2, 4] {
            let s = StokesSystem::new(&unit_square_mesh(n), k, ConformityMode::Relaxed, 1.0, default_lambda(k))?;
            println!("k={k} n={n}: coercivity {:.4}  inf-sup {:.4}", coercivity_constant(&s)?, inf_sup_constant(&s)?);
        }
    }
    Ok(())
}
