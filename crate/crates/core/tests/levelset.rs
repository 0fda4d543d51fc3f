use macroipm::initial_data::{compute_s0, AnalyticGraph};
use macroipm::levelset::{
    solve_eta, sup_distance, AnsatzField, ConvergenceReport, EtaTrajectory, LevelSetSolver, Operator, SolverConfig,
};
use macroipm::quadrature::{graded_mesh, time_weighted_average};
use macroipm::spectral::Spectrum;
use macroipm::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn small_config(alpha: f64, horizon: f64) -> SolverConfig {
    SolverConfig {
        alpha,
        modes: 16,
        quad_points: 32,
        n2: 17,
        horizon,
        time_nodes: 8,
        ..SolverConfig::default()
    }
}

fn cosine_solution() -> &'static (AnsatzField, ConvergenceReport) {
    static CELL: OnceLock<(AnsatzField, ConvergenceReport)> = OnceLock::new();
    CELL.get_or_init(|| solve_eta(&AnalyticGraph::cosine(0.1, 1), small_config(0.5, 0.05)).unwrap())
}

#[test]
fn flat_data_gives_zero_in_one_iteration() {
    let (ansatz, report) = solve_eta(&AnalyticGraph::flat(), small_config(0.5, 0.05)).unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 1);
    assert_eq!(report.residual, 0.0);
    for i in 0..ansatz.eta.times.len() {
        assert_eq!(ansatz.eta.ball_norm(i), 0.0);
    }
}

#[test]
fn assembled_field_examples() {
    let g = AnalyticGraph::cosine(0.1, 1);
    let (ansatz, _) = cosine_solution();
    let at_zero = ansatz.assemble_f(0.0);
    for row in &at_zero.f {
        for (m, v) in row.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * m as f64 / row.len() as f64;
            assert!((v - g.eval_real(x, 0)).abs() < 1e-14);
        }
    }
    let zero_eta = AnsatzField::new(
        g.clone(),
        ansatz.s0.clone(),
        EtaTrajectory::zeros(0.5, vec![0.0, 0.05], 17, 15),
    );
    let snap = zero_eta.assemble_f(0.01);
    let expected = 0.1 + 0.01 * ansatz.s0.eval(0.0);
    for row in &snap.f {
        assert!((row[0] - expected).abs() < 1e-14);
    }
    let flat = AnsatzField::new(
        AnalyticGraph::flat(),
        compute_s0(&AnalyticGraph::flat(), 64).unwrap(),
        EtaTrajectory::zeros(0.5, vec![0.0, 0.05], 17, 15),
    );
    assert!(flat.assemble_f(0.03).f.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn operator_vanishes_at_time_zero_and_for_flat_data() {
    let g = AnalyticGraph::cosine(0.1, 1);
    let s0 = compute_s0(&g, 512).unwrap();
    let op = Operator::new(&g, &s0, 0.5, 16, 32, 17);
    let eta = vec![Spectrum::zero(15); 17];
    let (f, _) = op.eval(&eta, 0.0).unwrap();
    assert!(f.iter().flatten().all(|&v| v == 0.0));
    let flat = AnalyticGraph::flat();
    let op = Operator::new(&flat, &compute_s0(&flat, 64).unwrap(), 0.5, 16, 32, 17);
    let (f, _) = op.eval(&eta, 0.04).unwrap();
    assert!(f.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn affine_term_is_order_t_log_t() {
    let g = AnalyticGraph::cosine(0.1, 1);
    let s0 = compute_s0(&g, 512).unwrap();
    let eta = vec![Spectrum::zero(15); 17];
    let constants = |n_quad: usize| -> Vec<f64> {
        let op = Operator::new(&g, &s0, 0.5, 16, n_quad, 17);
        [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&t: &f64| {
                let (f, _) = op.eval(&eta, t).unwrap();
                let sup = f.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
                sup / (t * t.ln().abs())
            })
            .collect()
    };
    let (coarse, fine) = (constants(32), constants(64));
    for (a, b) in coarse.iter().zip(&fine) {
        assert!(a.is_finite() && *a < 1.0, "{coarse:?}");
        assert!((a - b).abs() <= 0.01 * b, "{coarse:?} vs {fine:?}");
    }
}

#[test]
fn weighted_average_examples() {
    let (t, alpha) = (0.1f64, 0.5);
    let (nodes, weights) = graded_mesh(t, 32, 2.0);
    let constant = time_weighted_average(&vec![2.0; nodes.len()], &weights, t, alpha);
    assert!((constant - 2.0 * t.powf(-alpha)).abs() < 1e-12);
    let linear = time_weighted_average(&nodes, &weights, t, alpha);
    assert!((linear / (0.5 * t.powf(1.0 - alpha)) - 1.0).abs() < 1e-12);
    let samples: Vec<f64> = nodes.iter().map(|&s| if s > 0.0 { -s * s.ln() } else { 0.0 }).collect();
    let exact = (0.25 * t * t - 0.5 * t * t * t.ln()) / t.powf(1.0 + alpha);
    let got = time_weighted_average(&samples, &weights, t, alpha);
    assert!((got / exact - 1.0).abs() < 1e-6, "{got} vs {exact}");
}

#[test]
fn converged_solution_invariants() {
    let (ansatz, report) = cosine_solution();
    let eta = &ansatz.eta;
    assert!(report.converged && eta.converged);
    assert!(report.residual <= 2.0 * 1e-10);
    let ratios = report.ratios();
    assert!(ratios[ratios.len() - 2..].iter().all(|&r| r <= 0.9), "{ratios:?}");
    assert_eq!(eta.times[0], 0.0);
    assert_eq!(eta.ball_norm(0), 0.0);
    for (i, &t) in eta.times.iter().enumerate().skip(1) {
        assert!(eta.ball_norm(i) < 1.0);
        let snap = ansatz.assemble_f(t);
        snap.check_monotone().unwrap();
        let bound = 0.5 * t.powf(1.5);
        assert!(snap.d2.iter().flatten().all(|d| d.abs() <= bound), "t = {t}");
    }
    assert!(report.nondegeneracy.is_finite() && report.max_integrand.is_finite());
}

#[test]
fn eta_grows_like_t_to_one_minus_alpha() {
    let (ansatz, _) = cosine_solution();
    let eta = &ansatz.eta;
    // |eta| / (t^{1-alpha} |log t|) stays bounded on the smallest nodes
    let scaled: Vec<f64> = (1..=3)
        .map(|i| {
            let t = eta.times[i];
            let sup = eta.values(i).iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            sup / (t.sqrt() * t.ln().abs())
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 2.0, "{scaled:?}");
}

#[test]
fn zeta_is_independent_of_alpha() {
    let g = AnalyticGraph::cosine(0.1, 1);
    let low = solve_eta(&g, small_config(0.3, 0.02)).unwrap().0.eta;
    let high = solve_eta(&g, small_config(0.6, 0.02)).unwrap().0.eta;
    for (i, &t) in low.times.iter().enumerate().skip(1) {
        for (a, b) in low.values(i).iter().zip(&high.values(i)) {
            for (x, y) in a.iter().zip(b) {
                assert!((t.powf(1.3) * x - t.powf(1.6) * y).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn too_long_horizon_diverges() {
    let config = SolverConfig {
        time_nodes: 4,
        ..small_config(0.5, 1.0)
    };
    let mut solver = LevelSetSolver::new(&AnalyticGraph::cosine(0.5, 1), config).unwrap();
    let err = solver.run().unwrap_err();
    assert!(matches!(err, Error::Divergence { .. } | Error::MonotonicityViolation { .. }), "{err}");
    assert!(!solver.report().converged);
    assert!(!solver.report().message.is_empty());
}

#[test]
fn stagnation_is_reported() {
    let config = SolverConfig {
        max_iters: 2,
        ..small_config(0.5, 0.05)
    };
    let err = solve_eta(&AnalyticGraph::cosine(0.1, 1), config).unwrap_err();
    assert!(matches!(err, Error::Stagnation { iterations: 2, .. }), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let g = AnalyticGraph::cosine(0.1, 1);
    for config in [
        SolverConfig { alpha: 1.0, ..small_config(0.5, 0.05) },
        SolverConfig { modes: 12, ..small_config(0.5, 0.05) },
        SolverConfig { n2: 16, ..small_config(0.5, 0.05) },
        SolverConfig { sub_nodes: 7, ..small_config(0.5, 0.05) },
    ] {
        assert!(matches!(LevelSetSolver::new(&g, config), Err(Error::Config(_))));
    }
}

#[test]
fn checkpoint_and_report_round_trip() {
    let (ansatz, report) = cosine_solution();
    let back = EtaTrajectory::from_text(&ansatz.eta.to_text()).unwrap();
    assert_eq!(&back, &ansatz.eta);
    assert_eq!(sup_distance(&back, &ansatz.eta), 0.0);
    assert_eq!(&ConvergenceReport::from_text(&report.to_text()).unwrap(), report);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_in_time_is_bounded_by_the_nodes(t in 0.0f64..0.06) {
        let eta = &cosine_solution().0.eta;
        let rows = eta.at(t);
        let sup = |r: &[Spectrum]| r.iter().map(|s| s.sup_norm_bound()).fold(0.0, f64::max);
        let largest = eta.rows.iter().map(|r| sup(r)).fold(0.0, f64::max);
        prop_assert!(sup(&rows) <= largest + 1e-15);
        if t == 0.0 {
            prop_assert_eq!(sup(&rows), 0.0);
        }
    }
}
