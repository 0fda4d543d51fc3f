use macroipm::diagnostics::flat_oracle;
use macroipm::fv::{
    self, godunov_flux, mixing_zone_width, spectral_velocity, upwind_transport_flux, FvConfig, FvSolver, MAX_CFL,
};
use macroipm::initial_data::AnalyticGraph;
use macroipm::reconstruction::Grid;
use macroipm::Error;
use proptest::prelude::*;

fn config(n1: usize, n2: usize, half_height: f64) -> FvConfig {
    FvConfig {
        n1,
        n2,
        half_height,
        ..FvConfig::default()
    }
}

#[test]
fn flux_examples() {
    assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
    assert_eq!(godunov_flux(1.0, -1.0), 1.0);
    assert_eq!(godunov_flux(0.5, 0.5), 0.25);
    assert_eq!(upwind_transport_flux(1.0, 0.2, 0.9), 0.2);
    assert_eq!(upwind_transport_flux(-1.0, 0.2, 0.9), -0.9);
    assert_eq!(upwind_transport_flux(0.0, 0.2, 0.9), 0.0);
}

#[test]
fn constant_state_is_unchanged() {
    let c = config(8, 32, 1.0);
    let mut solver = FvSolver::new(c.clone(), vec![1.0; 8 * 32]).unwrap();
    solver.step(f64::INFINITY).unwrap();
    assert!(solver.state.rho.iter().all(|&r| r == 1.0));
}

#[test]
fn x1_independent_density_has_no_velocity() {
    let grid = Grid::cell_centred(16, 64, 1.0);
    let rho: Vec<f64> = (0..grid.len()).map(|k| (grid.x2(k / 16) * 3.0).tanh()).collect();
    let v = spectral_velocity(&grid, &rho);
    let (a, b) = v.max_abs();
    assert_eq!((a, b), (0.0, 0.0));
}

#[test]
fn manufactured_streamfunction_is_second_order() {
    // psi = sin(x1) exp(-x2^2), so lap psi = sin(x1) (4 x2^2 - 3) exp(-x2^2) = -d1 rho
    let error = |n1: usize, n2: usize| {
        let grid = Grid::cell_centred(n1, n2, 6.0);
        let mut rho = vec![0.0; grid.len()];
        for j in 0..n2 {
            for i in 0..n1 {
                let (x1, x2) = (grid.x1(i), grid.x2(j));
                rho[grid.index(i, j)] = x1.cos() * (4.0 * x2 * x2 - 3.0) * (-x2 * x2).exp();
            }
        }
        let v = spectral_velocity(&grid, &rho).cell_centred(&grid, 0.0);
        let mut worst = 0.0f64;
        for j in 0..n2 {
            for i in 0..n1 {
                let (x1, x2) = (grid.x1(i), grid.x2(j));
                let exact = [2.0 * x2 * x1.sin() * (-x2 * x2).exp(), x1.cos() * (-x2 * x2).exp()];
                let got = v.values[grid.index(i, j)];
                worst = worst.max((got[0] - exact[0]).abs()).max((got[1] - exact[1]).abs());
            }
        }
        worst
    };
    let ratio = error(32, 128) / error(64, 256);
    assert!(ratio > 3.5, "ratio {ratio}");
}

/// First-order schemes smear the rarefaction corners by `O(dx log(1/dx))`.
fn width_tolerance(dx: f64) -> f64 {
    0.5 * dx * (1.0 / dx).log2()
}

#[test]
fn flat_run_matches_the_exact_profile() {
    let gap = |n2: usize| {
        let run = fv::run(&AnalyticGraph::flat(), &[0.1], config(4, n2, 0.5)).unwrap();
        let rho = &run.densities[0];
        let v = &run.velocities[0];
        assert!(v.values.iter().all(|u| u[0].abs() <= 1e-10 && u[1].abs() <= 1e-10));
        let g = &rho.grid;
        let l1: f64 = (0..g.n2)
            .map(|j| (rho.at(0, j) - flat_oracle(0.1, g.x2(j)).rho).abs())
            .sum::<f64>()
            * g.dx2();
        let width = mixing_zone_width(rho);
        assert!((width - 0.4).abs() <= width_tolerance(g.dx2()), "width {width} at n2 = {n2}");
        l1
    };
    let (coarse, fine) = (gap(256), gap(512));
    assert!(fine < 0.75 * coarse, "{coarse} -> {fine}");
}

#[test]
fn reduced_mu_narrows_the_zone() {
    let mut c = config(4, 512, 0.5);
    c.mu = 0.9;
    let run = fv::run(&AnalyticGraph::flat(), &[0.1], c).unwrap();
    let width = mixing_zone_width(&run.densities[0]);
    assert!((width - 0.36).abs() <= width_tolerance(run.densities[0].grid.dx2()), "{width}");
}

#[test]
fn mass_is_conserved_over_a_thousand_steps() {
    let mut solver = FvSolver::from_graph(config(8, 2048, 1.0), &AnalyticGraph::cosine(0.1, 1)).unwrap();
    let m0 = solver.state.mass();
    let scale: f64 = solver.state.rho.iter().map(|r| r.abs()).sum::<f64>() * solver.state.grid.cell_area();
    for _ in 0..1000 {
        let report = solver.step(f64::INFINITY).unwrap();
        assert!(report.entropy_production <= 1e-10);
    }
    assert!((solver.state.mass() - m0).abs() <= 1e-12 * scale);
}

#[test]
fn cos_run_structure() {
    let run = fv::run(&AnalyticGraph::cosine(0.1, 1), &[0.025, 0.05], config(32, 128, 1.0)).unwrap();
    assert!(run.max_entropy_production <= 1e-10);
    assert!(run.densities.iter().flat_map(|d| &d.values).all(|r| r.abs() <= 1.0));
    let energies: Vec<f64> = run.records.iter().map(|r| r.e_rel).collect();
    assert!(energies[0] < 0.0 && energies[1] < energies[0], "{energies:?}");
    for r in &run.records {
        assert!(r.is_finite());
        assert!(r.mass_error.abs() < 1e-12);
        assert!(r.hull_violation_max <= 1e-12);
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let mut c = config(8, 32, 1.0);
    c.cfl = 0.9;
    let err = FvSolver::new(c, vec![1.0; 8 * 32]).unwrap_err();
    assert!(matches!(err, Error::CflTooLarge(_)));
    assert!(err.to_string().contains("maximum principle"));
    assert_eq!(MAX_CFL, 0.45);
    // the interface reaches the guard rows
    let err = FvSolver::from_graph(config(8, 32, 0.1), &AnalyticGraph::cosine(0.1, 1)).unwrap_err();
    assert!(matches!(err, Error::BoundaryContamination));
    assert!(fv::run(&AnalyticGraph::flat(), &[0.2, 0.1], config(8, 32, 1.0)).is_err());
}

#[test]
fn zone_reaching_the_boundary_aborts() {
    let result = fv::run(&AnalyticGraph::flat(), &[0.5], config(4, 64, 0.5));
    assert!(matches!(result, Err(Error::BoundaryContamination)), "{result:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn godunov_matches_brute_force(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let samples = (0..=2000).map(|k| a + (b - a) * k as f64 / 2000.0).map(|r| r * r);
        let (lo, hi) = samples.fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(v), h.max(v)));
        let expected = if a <= b { lo } else { hi };
        let expected = if a <= 0.0 && b >= 0.0 { 0.0 } else { expected };
        prop_assert!((godunov_flux(a, b) - expected).abs() < 1e-12);
        prop_assert_eq!(godunov_flux(a, a), a * a);
    }

    #[test]
    fn velocity_is_discretely_divergence_free(values in prop::collection::vec(-1.0f64..1.0, 8 * 8)) {
        let (n1, n2) = (8, 16);
        let grid = Grid::cell_centred(n1, n2, 1.0);
        let mut rho = vec![-1.0; n1 * 4];
        rho.extend(values);
        rho.extend(vec![1.0; n1 * 4]);
        let v = spectral_velocity(&grid, &rho);
        let scale = v.max_abs().0.max(v.max_abs().1).max(1.0);
        for j in 0..n2 {
            for i in 0..n1 {
                prop_assert!(v.divergence(i, j, grid.dx1(), grid.dx2()).abs() <= 1e-12 * scale / grid.dx1());
            }
        }
    }

    #[test]
    fn steps_keep_the_maximum_principle(values in prop::collection::vec(-1.0f64..1.0, 8 * 8), cfl in 0.05f64..0.45) {
        let mut rho = vec![-1.0; 8 * 12];
        rho.extend(values);
        rho.extend(vec![1.0; 8 * 12]);
        let mut c = config(8, 32, 1.0);
        c.cfl = cfl;
        let mut solver = FvSolver::new(c, rho).unwrap();
        let m0 = solver.state.mass();
        for _ in 0..3 {
            let report = solver.step(f64::INFINITY).unwrap();
            prop_assert!(report.entropy_production <= 1e-10);
        }
        prop_assert!(solver.state.rho.iter().all(|r| r.abs() <= 1.0));
        prop_assert!((solver.state.mass() - m0).abs() <= 1e-13);
    }
}
