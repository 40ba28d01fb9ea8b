//! Unknown counts, globally coupled unknowns and condensed nonzeros of the
//! Full and Relaxed spaces.
use hdg_stokes::analysis::count_costs;
use hdg_stokes::fespace::ConformityMode;
use hdg_stokes::mesh::unit_square_mesh;

fn main() -> hdg_stokes::Result<()> {
    for n in [4, 8, 16] {
        let mesh = unit_square_mesh(n);
        for k in 1..=4 {
            let full = count_costs(&mesh, k, ConformityMode::Full)?;
            let relaxed = count_costs(&mesh, k, ConformityMode::Relaxed)?;
            println!(
                "n={n:2} k={k}: dofs {:6} / {:6}  gdofs {:6} / {:6}  nze {:8} / {:8}  (full / relaxed, {} interior facets)",
                full.dofs,
                relaxed.dofs,
                full.gdofs,
                relaxed.gdofs,
                full.nze,
                relaxed.nze,
                mesh.n_interior_facets()
            );
        }
    }
    Ok(())
}
