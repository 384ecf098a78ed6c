mod common;

use common::*;
use proptest::prelude::*;
use ridgeless::kernel::{KernelSpec, TrainingGrid};
use ridgeless::model::*;
use ridgeless::reference::{linspace, relative_error, sample_solution};
use ridgeless::solver::*;
use ridgeless::Error;

fn baseline_fit() -> KernelSolution {
    solve(
        &growth(),
        &TrainingGrid::integers(40),
        &KernelSpec::baseline(),
        &SolverConfig::default(),
    )
    .unwrap()
}

fn sup_distance(a: &KernelSolution, b: &KernelSolution, horizon: f64) -> f64 {
    let times = linspace(horizon, 200);
    let (sa, sb) = (sample_solution(a, &times).unwrap(), sample_solution(b, &times).unwrap());
    let mut d: f64 = 0.0;
    for i in 0..times.len() {
        for (u, v) in sa.x[i]
            .iter()
            .chain(&sa.mu[i])
            .chain(&sa.y[i])
            .zip(sb.x[i].iter().chain(&sb.mu[i]).chain(&sb.y[i]))
        {
            d = d.max((u - v).abs());
        }
    }
    d
}

#[test]
fn baseline_growth_matches_benchmark() {
    let m = growth();
    let sol = baseline_fit();
    let bench = growth_benchmark();
    let rep = relative_error(
        &sample_solution(&sol, &bench.times).unwrap(),
        &bench,
        &m.variable_names(),
    )
    .unwrap();
    assert!(rep.max_for("x").unwrap() <= 5e-3);
    assert!(rep.max_for("y").unwrap() <= 8e-3);
}

#[test]
fn fit_from_steady_state_is_flat() {
    let grid = TrainingGrid::integers(40);
    let m = growth().with_initial_state(vec![GROWTH_X_SS]).unwrap();
    let sol = solve(&m, &grid, &KernelSpec::baseline(), &SolverConfig::default()).unwrap();
    for t in linspace(40.0, 80) {
        let e = evaluate_solution(&sol, t).unwrap();
        assert!(
            (e.x[0] - GROWTH_X_SS).abs() < 1e-8 && (e.y[0] - GROWTH_Y_SS).abs() < 1e-8,
            "t = {t}: {e:?}"
        );
    }
    // x0 = 2.0 sits 1.88e-4 above x*, so the path drifts by about that much
    let m = growth().with_initial_state(vec![2.0]).unwrap();
    let sol = solve(&m, &grid, &KernelSpec::baseline(), &SolverConfig::default()).unwrap();
    for t in linspace(40.0, 80) {
        let e = evaluate_solution(&sol, t).unwrap();
        assert!((e.x[0] - 2.0).abs() < 2.0 - GROWTH_X_SS + 1e-5, "t = {t}: {e:?}");
        assert!((e.y[0] - 1.05992).abs() < 1e-4, "t = {t}: {e:?}");
    }
}

#[test]
fn initial_state_is_exact() {
    let sol = baseline_fit();
    let e = evaluate_solution(&sol, 0.0).unwrap();
    assert_eq!(e.x, vec![1.0]);
    assert_eq!(e.mu, sol.mu0_hat);
    assert_eq!(e.y, sol.y0_hat);
    assert!(matches!(evaluate_solution(&sol, -1.0), Err(Error::Domain(_))));
}

#[test]
fn evaluation_examples() {
    let m = growth();
    let grid = TrainingGrid::integers(40);
    let k = KernelSpec::baseline();
    let mut params = vec![0.0; 3 * grid.len() + 2];
    params[3 * grid.len()] = 1.7;
    let flat = KernelSolution::from_parameters(&m, &grid, &k, &params).unwrap();
    for t in [0.0, 5.0, 60.0] {
        assert_eq!(evaluate_solution(&flat, t).unwrap().mu, vec![1.7]);
    }
    params[0] = 1.0;
    let bump = KernelSolution::from_parameters(&m, &grid, &k, &params).unwrap();
    let x10 = evaluate_solution(&bump, 10.0).unwrap().x[0];
    assert!((x10 - 1.0 - 6.32120558828557678404).abs() < 1e-12);
    assert!(solution_norms(&flat).iter().all(|&v| v == 0.0));
    params[0] = 3.0;
    let single = KernelSolution::from_parameters(&m, &grid, &k, &params).unwrap();
    assert!((solution_norms(&single)[0] - 9.0).abs() < 1e-12);
}

#[test]
fn objective_examples() {
    let cfg0 = SolverConfig {
        ridge_lambda: 0.0,
        ..Default::default()
    };
    let grid = TrainingGrid::integers(40);
    let k = KernelSpec::baseline();
    let n = grid.len();

    let at_ss = growth().with_initial_state(vec![GROWTH_X_SS]).unwrap();
    let mut params = vec![0.0; 3 * n + 2];
    params[3 * n] = 1.0 / GROWTH_Y_SS;
    params[3 * n + 1] = GROWTH_Y_SS;
    let (obj, _) = assemble_objective(&at_ss, &grid, &k, &cfg0, &params).unwrap();
    assert!(obj < 1e-24, "{obj:e}");

    let asset = make_asset_pricing(1.0, 0.02, -0.2, 0.1).unwrap();
    // μ̂₀ = 1: the co-state equation is undefined at μ = 0
    let mut flat = vec![0.0; 2 * n + 1];
    flat[2 * n] = 1.0;
    let (_, res) = assemble_objective(&asset, &grid, &k, &cfg0, &flat).unwrap();
    assert_eq!(res.len(), 2 * n);
    for i in 0..n {
        assert!((res[2 * i] - 0.18).abs() < 1e-15);
    }

    let params: Vec<f64> = (0..3 * n + 2)
        .map(|i| 0.01 * ((i * 7919) % 13) as f64 + if i >= 3 * n { 1.0 } else { 0.0 })
        .collect();
    let (obj, res) = assemble_objective(&growth(), &grid, &k, &cfg0, &params).unwrap();
    assert_eq!(obj, res.iter().map(|r| r * r).sum::<f64>());
}

#[test]
fn non_finite_residual_names_point_and_equation() {
    let grid = TrainingGrid::integers(10);
    let n = grid.len();
    let mut params = vec![0.0; 3 * n + 2];
    params[0] = -10.0;
    params[3 * n] = 1.0;
    params[3 * n + 1] = 1.0;
    let err = assemble_objective(
        &growth(),
        &grid,
        &KernelSpec::baseline(),
        &SolverConfig::default(),
        &params,
    )
    .unwrap_err();
    assert!(matches!(err, Error::NonFiniteResidual { .. }), "{err}");
}

#[test]
fn zero_ridge_is_a_configuration_error() {
    let cfg = SolverConfig {
        ridge_lambda: 0.0,
        ..Default::default()
    };
    let err = solve(&growth(), &TrainingGrid::integers(40), &KernelSpec::baseline(), &cfg).unwrap_err();
    assert!(matches!(err, Error::Configuration(_)));
}

#[test]
fn interpolation_bound_holds_at_convergence() {
    let sol = baseline_fit();
    let rows = (sol.grid.len() * 3) as f64;
    assert!(sol.fit_report.max_abs_residual <= (SolverConfig::default().residual_tolerance * rows).sqrt());
}

#[test]
fn solve_is_deterministic() {
    let (a, b) = (baseline_fit(), baseline_fit());
    assert_eq!(a.parameters(), b.parameters());
}

#[test]
fn ridge_path_is_stable() {
    let cfg = SolverConfig {
        residual_tolerance: 1e-9,
        ..Default::default()
    };
    let grid = TrainingGrid::integers(40);
    let k = KernelSpec::baseline();
    let small = solve(&growth(), &grid, &k, &cfg).unwrap();
    let large = solve(
        &growth(),
        &grid,
        &k,
        &SolverConfig {
            ridge_lambda: 1e-4,
            ..cfg
        },
    )
    .unwrap();
    assert!(sup_distance(&small, &large, 40.0) <= 1e-3);
}

#[test]
fn minimum_norm_selection_is_unique_in_practice() {
    let grid = TrainingGrid::integers(40);
    let k = KernelSpec::baseline();
    let returned = baseline_fit();
    let fits: Vec<KernelSolution> = [0.5, 0.75, 1.25, 1.6, 2.0]
        .iter()
        .filter_map(|s| {
            let cfg = SolverConfig {
                initial_mu0: Some(vec![*s]),
                ..Default::default()
            };
            solve(&growth(), &grid, &k, &cfg).ok()
        })
        .collect();
    assert_eq!(fits.len(), 5);
    let smallest = fits
        .iter()
        .map(|f| f.fit_report.objective)
        .fold(returned.fit_report.objective, f64::min);
    assert!(returned.fit_report.objective <= 1.01 * smallest);
    for f in &fits {
        assert!(sup_distance(&returned, f, 40.0) <= 1e-3);
    }
}

#[test]
fn jump_penalty_flag_adds_norm_terms() {
    let grid = TrainingGrid::integers(10);
    let n = grid.len();
    let params: Vec<f64> = (0..3 * n + 2).map(|i| if i >= 3 * n { 1.0 } else { 0.01 }).collect();
    let k = KernelSpec::baseline();
    let off = assemble_objective(&growth(), &grid, &k, &SolverConfig::default(), &params)
        .unwrap()
        .0;
    let cfg = SolverConfig {
        penalize_jump_derivatives: true,
        ..Default::default()
    };
    let on = assemble_objective(&growth(), &grid, &k, &cfg, &params).unwrap().0;
    let sol = KernelSolution::from_parameters(&growth(), &grid, &k, &params).unwrap();
    let y_norm = solution_norms(&sol)[2];
    assert!((on - off - 1e-6 * y_norm).abs() < 1e-15 * on.max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn analytic_gradient_matches_central_differences(
        coeffs in proptest::collection::vec(-0.05f64..0.05, 3 * 8),
        mu0 in 0.5f64..2.0,
        y0 in 0.5f64..1.5,
        nu in prop::sample::select(vec![0.5, 1.5, 2.5]),
        penalize in any::<bool>(),
    ) {
        let grid = TrainingGrid::new((0..8).map(|i| 5.0 * i as f64).collect()).unwrap();
        let kernel = KernelSpec::matern(nu, 10.0, 1.0).unwrap();
        let cfg = SolverConfig { ridge_lambda: 1e-3, penalize_jump_derivatives: penalize, ..Default::default() };
        let model = growth();
        let mut params = coeffs.clone();
        params.extend([mu0, y0]);
        // only points with finite residuals are in the objective's domain
        prop_assume!(assemble_objective(&model, &grid, &kernel, &cfg, &params).is_ok());
        let grad = objective_gradient(&model, &grid, &kernel, &cfg, &params).unwrap();
        let h = 1e-6;
        for i in 0..params.len() {
            let (mut up, mut down) = (params.clone(), params.clone());
            up[i] += h;
            down[i] -= h;
            let Ok((fu, _)) = assemble_objective(&model, &grid, &kernel, &cfg, &up) else { continue };
            let Ok((fd, _)) = assemble_objective(&model, &grid, &kernel, &cfg, &down) else { continue };
            let fdiff = (fu - fd) / (2.0 * h);
            let scale = grad[i].abs().max(fdiff.abs()).max(1e-3);
            prop_assert!((grad[i] - fdiff).abs() <= 1e-5 * scale, "component {i}: {} vs {fdiff}", grad[i]);
        }
    }
}
