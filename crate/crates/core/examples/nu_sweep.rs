//! Gradient errors of the basic and pressure-robust variants over nine
//! decades of viscosity on a fixed mesh.
use hdg_stokes::analysis::{loglog_slope, nu_sweep};
use hdg_stokes::assembly::default_lambda;

fn main() -> hdg_stokes::Result<()> {
    let k = 2;
    let nus: Vec<f64> = (-6..=2).map(|j| 10f64.powi(j)).collect();
    let rows = nu_sweep(k, 8, &nus, default_lambda(k))?;
    println!("{:>10} {:>12} {:>12}", "nu", "basic_h1", "pr_h1");
    for r in &rows {
        println!("{:>10.0e} {:>12.4e} {:>12.4e}", r.nu, r.basic_h1, r.pr_h1);
    }
    let small: Vec<_> = rows.iter().filter(|r| r.nu < 1.0).collect();
    let slope = loglog_slope(&small.iter().map(|r| r.nu).collect::<Vec<_>>(), &small.iter().map(|r| r.basic_h1).collect::<Vec<_>>());
    let (lo, hi) = rows.iter().fold((f64::MAX, 0.0f64), |(a, b), r| (a.min(r.pr_h1), b.max(r.pr_h1)));
    println!("basic slope for nu < 1: {slope:.3}");
    println!("pr spread max/min: {:.3}", hi / lo);
    Ok(())
}
