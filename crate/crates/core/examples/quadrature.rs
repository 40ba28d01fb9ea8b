//! Collapsed-coordinate Gauss-Jacobi rules on the reference simplices,
//! checked against exact monomial integrals.
use hdg_stokes::polyquad::{simplex_quadrature, tetrahedron_rule};

fn main() -> hdg_stokes::Result<()> {
    // reference triangle (-1,0), (1,0), (0,1): ∫ y² = 1/6
    let tri = simplex_quadrature::<2>(6)?;
    println!("triangle: {} points, ∫y² = {:.15} (exact {:.15})", tri.len(), tri.integrate(|p| p[1] * p[1]), 1.0 / 6.0);
    let tet = tetrahedron_rule(4);
    println!("tetrahedron: {} points, volume = {:.15} (exact {:.15})", tet.len(), tet.integrate(|_| 1.0), 1.0 / 3.0);
    Ok(())
}
