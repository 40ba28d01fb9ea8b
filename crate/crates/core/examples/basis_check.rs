//! Normal-trace orthogonality and highest-order volume orthogonality of
//! the hierarchical H(div) bases in two and three dimensions.
use hdg_stokes::refbasis::{build_reference_basis, check_highest_order_volume_orthogonality, check_normal_orthogonality};

fn main() -> hdg_stokes::Result<()> {
    for (dim, kmax, facets) in [(2, 6, 3), (3, 4, 4)] {
        for k in 1..=kmax {
            let b = build_reference_basis(dim, k)?;
            let normal = (0..facets).map(|f| check_normal_orthogonality(&b, f)).fold(0.0, f64::max);
            let volume = check_highest_order_volume_orthogonality(&b);
            println!("{dim}D k={k}: {:4} functions, normal {normal:.2e}, volume {volume:.2e}", b.len());
        }
    }
    Ok(())
}
