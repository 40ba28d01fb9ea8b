//! Structured meshes, uniform red refinement and the plain-text mesh format.
use hdg_stokes::mesh::{unit_square_mesh, Mesh};

fn main() -> hdg_stokes::Result<()> {
    let mut mesh = unit_square_mesh(2);
    for level in 0..4 {
        println!(
            "level {level}: {:5} elements, {:5} interior facets, {:3} boundary facets, h = {:.4}",
            mesh.n_elements(),
            mesh.n_interior_facets(),
            mesh.n_boundary_facets(),
            mesh.max_h()
        );
        mesh = mesh.refine();
    }
    let text = mesh.dump();
    let back = Mesh::load(&text)?;
    println!("round trip preserves the mesh: {}", back == mesh);
    Ok(())
}
