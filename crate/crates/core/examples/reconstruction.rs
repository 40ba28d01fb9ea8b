//! Properties of the averaging reconstruction on random relaxed fields:
//! conformity, preserved moments, energy stability and agreement with the
//! BDM-type interpolation.
use hdg_stokes::analysis::check_reconstruction;
use hdg_stokes::assembly::{default_lambda, StokesSystem};
use hdg_stokes::fespace::ConformityMode;
use hdg_stokes::mesh::unit_square_mesh;
use rand::{Rng, SeedableRng};

fn main() -> hdg_stokes::Result<()> {
    let mesh = unit_square_mesh(2);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for k in 1..=4 {
        let system = StokesSystem::new(&mesh, k, ConformityMode::Relaxed, 1.0, default_lambda(k))?;
        let mut worst = 0.0f64;
        let mut ratio = 0.0f64;
        for _ in 0..10 {
            let x: Vec<f64> = (0..system.dof_map.n_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = check_reconstruction(&system, &x)?;
            worst = worst.max(c.conformity).max(c.facet_moments).max(c.volume_moments).max(c.bdm_agreement);
            ratio = ratio.max(c.stability);
        }
        println!("k={k}: worst moment/conformity defect {worst:.1e}, max |||Ru|||/|||u||| {ratio:.3}");
    }
    Ok(())
}
