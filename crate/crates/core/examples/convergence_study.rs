//! Broken-H¹ and L² convergence of the basic, pressure-robust and
//! reconstructed solutions for the manufactured flow.
use hdg_stokes::analysis::{convergence_study, StudyConfig};
use hdg_stokes::assembly::default_lambda;
use hdg_stokes::fespace::ConformityMode;
use hdg_stokes::solver::Variant;

fn main() -> hdg_stokes::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2);
    let levels: usize = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(4);
    for (variant, reconstruct, nu) in [(Variant::Basic, false, 1e-3), (Variant::PressureRobust, false, 1e-3), (Variant::PressureRobust, true, 1e-3), (Variant::Basic, false, 1.0)] {
        let cfg = StudyConfig { k, mode: ConformityMode::Relaxed, variant, reconstruct, levels, n0: 2, nu, lambda: default_lambda(k), reduced: false };
        let table = convergence_study(&cfg)?;
        println!("k={k} variant={} reconstruct={reconstruct} nu={nu:e}", variant.name());
        for r in &table.rows {
            println!(
                "  n_el={:5} h1={:.3e} ({:>5}) l2={:.3e} ({:>5}) p={:.3e} ({:>5}) div={:.1e}",
                r.elements,
                r.report.h1_broken_velocity,
                r.rate_h1_u.map_or("-".into(), |v| format!("{v:.2}")),
                r.report.l2_velocity,
                r.rate_l2_u.map_or("-".into(), |v| format!("{v:.2}")),
                r.report.l2_pressure,
                r.rate_l2_p.map_or("-".into(), |v| format!("{v:.2}")),
                r.report.div_l2,
            );
        }
    }
    Ok(())
}
