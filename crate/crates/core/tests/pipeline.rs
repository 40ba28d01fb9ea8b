use hdg_stokes::analysis::{compute_errors, convergence_study, discrete_energy_norm, manufactured_case, StudyConfig};
use hdg_stokes::assembly::{default_lambda, rhs_basic, StokesSystem};
use hdg_stokes::fespace::{ConformityMode, VelocityField};
use hdg_stokes::mesh::{unit_square_mesh, Mesh};
use hdg_stokes::solver::{solve_basic, solve_monolithic, solve_pr, Variant};

fn velocity_norm(s: &StokesSystem, x: &[f64]) -> f64 {
    let mut v = vec![0.0; x.len()];
    VelocityField::from_global(&s.mesh, &s.dof_map, x).to_global(&s.dof_map, &mut v);
    discrete_energy_norm(s, &v).unwrap()
}

#[test]
fn gradient_forces_leave_pressure_robust_velocity_at_rest() {
    // f = ∇φ is balanced by the pressure alone
    let grad = |x: [f64; 2]| [3.0 * x[0] * x[0] * x[1].sin() + 1.0, x[0].powi(3) * x[1].cos()];
    for k in 1..=3 {
        let s = StokesSystem::new(&unit_square_mesh(4), k, ConformityMode::Relaxed, 1e-4, default_lambda(k)).unwrap();
        let pr = velocity_norm(&s, &solve_pr(&s, &grad).unwrap().x);
        let basic = velocity_norm(&s, &solve_basic(&s, &grad).unwrap().x);
        assert!(pr < 1e-9, "k={k}: {pr:e}");
        assert!(basic > 1e-4, "k={k}: {basic:e}");
    }
}

#[test]
fn condensed_and_monolithic_solves_agree() {
    let case = manufactured_case(0.5);
    for mode in [ConformityMode::Full, ConformityMode::Relaxed] {
        let s = StokesSystem::new(&unit_square_mesh(3), 2, mode, case.nu, default_lambda(2)).unwrap();
        let rhs = rhs_basic(&s, &|x| case.force(x)).unwrap();
        let (x, _) = solve_monolithic(&s, &rhs).unwrap();
        let sol = solve_basic(&s, &|x| case.force(x)).unwrap();
        let d = x.iter().zip(&sol.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{mode:?}: {d:e}");
    }
}

#[test]
fn mesh_round_trip_preserves_the_solution() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.mesh");
    let mesh = unit_square_mesh(3).refine();
    mesh.save(&path).unwrap();
    let loaded = Mesh::read(&path).unwrap();
    let case = manufactured_case(1.0);
    let solve = |m: &Mesh| {
        let s = StokesSystem::new(m, 1, ConformityMode::Relaxed, 1.0, default_lambda(1)).unwrap();
        let sol = solve_basic(&s, &|x| case.force(x)).unwrap();
        compute_errors(&s, &sol, &case).unwrap().h1_broken_velocity
    };
    assert_eq!(solve(&mesh), solve(&loaded));
}

#[test]
fn full_and_relaxed_spaces_converge_alike() {
    for mode in [ConformityMode::Full, ConformityMode::Relaxed] {
        let cfg = StudyConfig { k: 2, mode, variant: Variant::Basic, reconstruct: false, levels: 3, n0: 2, nu: 1.0, lambda: default_lambda(2), reduced: false };
        let t = convergence_study(&cfg).unwrap();
        let r = t.last().rate_h1_u.unwrap();
        assert!((r - 2.0).abs() < 0.25, "{mode:?}: {r}");
        let l2 = t.last().rate_l2_u.unwrap();
        assert!(l2 > 2.5, "{mode:?}: {l2}");
    }
}

#[test]
fn pressure_robust_error_does_not_depend_on_viscosity() {
    let errs: Vec<f64> = [1.0, 1e-6]
        .iter()
        .map(|&nu| {
            let case = manufactured_case(nu);
            let s = StokesSystem::new(&unit_square_mesh(4), 2, ConformityMode::Relaxed, nu, default_lambda(2)).unwrap();
            compute_errors(&s, &solve_pr(&s, &|x| case.force(x)).unwrap(), &case).unwrap().h1_broken_velocity
        })
        .collect();
    assert!((errs[0] / errs[1] - 1.0).abs() < 1e-3, "{errs:?}");
}
