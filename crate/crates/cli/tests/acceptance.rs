//! Acceptance criteria, one line each. Criteria listed in `EXPECTED_FAIL`
//! are known to miss their bound; they still run at full tolerance and the
//! run fails if one of them starts passing, so the list stays honest.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use ridgeless::diagnostics::{
    consistency_sweep, divergence_rate, robustness_sweep, steady_state_membership, transversality_at, Sampling,
};
use ridgeless::kernel::{gram_matrix, KernelSpec, TrainingGrid};
use ridgeless::model::{
    make_asset_pricing, make_human_capital, make_neoclassical_growth, make_optimal_advertising, make_skiba_growth,
    HumanCapitalParams, Technology,
};
use ridgeless::reference::{
    asset_pricing_fundamental, default_search_box, human_capital_initial_xh, integrate_ivp, linspace, relative_error,
    sample_solution, shooting_solve, steady_states, AssetParams,
};
use ridgeless::solver::{
    assemble_objective, evaluate_solution, initial_parameters, objective_gradient, solve, KernelSolution,
};
use ridgeless::{ModelSpec, SolverConfig, Trajectory};

/// Criteria whose bound is not met; see the decisions ledger.
const EXPECTED_FAIL: [usize; 2] = [2, 3];

type Check = Result<String, String>;

fn growth() -> ModelSpec {
    make_neoclassical_growth(1.0, 0.1, 0.11, 1.0 / 3.0).unwrap()
}

fn benchmark(times: &[f64]) -> Trajectory {
    let shot = shooting_solve(&growth(), 40.0, &[1.0], 1e-14).unwrap();
    shot.path.sample(times).unwrap()
}

fn fit(
    model: &ModelSpec,
    grid: &TrainingGrid,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<KernelSolution, String> {
    solve(model, grid, kernel, config).map_err(|e| e.to_string())
}

/// Max relative errors of `x` and `y` against the growth benchmark on `times`.
fn growth_errors(sol: &KernelSolution, times: &[f64]) -> (f64, f64) {
    let rep = relative_error(
        &sample_solution(sol, times).unwrap(),
        &benchmark(times),
        &growth().variable_names(),
    )
    .unwrap();
    (rep.max_for("x").unwrap(), rep.max_for("y").unwrap())
}

fn verdict(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn baseline_growth() -> Check {
    let times = linspace(40.0, 400);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let sol = pool.install(|| {
        fit(
            &growth(),
            &TrainingGrid::integers(40),
            &KernelSpec::baseline(),
            &SolverConfig::default(),
        )
    })?;
    let secs = start.elapsed().as_secs_f64();
    let (ex, ey) = growth_errors(&sol, &times);
    verdict(
        ex <= 5e-3 && ey <= 8e-3 && secs <= 10.0,
        format!("max eps_x {ex:.3e} (<= 5e-3), max eps_y {ey:.3e} (<= 8e-3), {secs:.2} s single-threaded (<= 10 s)"),
    )
}

fn robustness_table() -> Check {
    // (nu, ell, reported max eps_x, reported max eps_y)
    let table = [
        (0.5, 10.0, 1.8e-3, 2.9e-3),
        (1.5, 10.0, 5.9e-4, 3.0e-2),
        (2.5, 10.0, 1.4e-4, 2.4e-2),
        (0.5, 2.0, 3.1e-3, 2.8e-3),
        (0.5, 20.0, 1.9e-3, 8.2e-2),
    ];
    let times = linspace(40.0, 400);
    let bench = benchmark(&times);
    let cfg = SolverConfig {
        penalize_jump_derivatives: true,
        residual_tolerance: 1e-9,
        ..Default::default()
    };
    let cells: Vec<(f64, f64)> = table.iter().map(|&(nu, ell, _, _)| (nu, ell)).collect();
    let start = Instant::now();
    let rep = robustness_sweep(&growth(), &TrainingGrid::integers(40), &cells, 1.0, &cfg, Some(&bench))
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut pass = secs <= 60.0;
    let mut misses = Vec::new();
    let (mut ex, mut ey) = (Vec::new(), Vec::new());
    for (i, &(nu, ell, px, py)) in table.iter().enumerate() {
        let (mx, my) = (
            rep.max_error(i, "x").unwrap_or(f64::NAN),
            rep.max_error(i, "y").unwrap_or(f64::NAN),
        );
        for (name, got, want) in [("x", mx, px), ("y", my, py)] {
            let ratio = got / want;
            if !(0.1..=10.0).contains(&ratio) {
                pass = false;
                misses.push(format!("nu={nu} ell={ell} eps_{name} {got:.2e} vs {want:.1e}"));
            }
        }
        ex.push(mx);
        ey.push(my);
    }
    let smooth_wins = ex[2] < ex[0];
    let long_worst = (0..4).all(|i| ey[4] > ey[i]);
    pass &= smooth_wins && long_worst;
    verdict(
        pass,
        format!(
            "outside one order of magnitude: [{}]; nu=5/2 beats nu=1/2 on eps_x: {smooth_wins}; ell=20 worst eps_y: {long_worst}; {secs:.2} s",
            misses.join("; ")
        ),
    )
}

fn sparse_grid() -> Check {
    let grid = TrainingGrid::new(vec![0.0, 1.0, 3.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 38.0, 40.0]).unwrap();
    let times = linspace(40.0, 400);
    let sol = fit(&growth(), &grid, &KernelSpec::baseline(), &SolverConfig::default())?;
    let (ex, ey) = growth_errors(&sol, &times);
    let smoother = fit(
        &growth(),
        &grid,
        &KernelSpec::matern(1.5, 10.0, 1.0).unwrap(),
        &SolverConfig::default(),
    )?;
    let (sx, sy) = growth_errors(&smoother, &times);
    verdict(
        ex <= 1e-2 && ey <= 1e-2,
        format!(
            "nu=1/2: max eps_x {ex:.3e}, max eps_y {ey:.3e} (<= 1e-2); for reference nu=3/2 gives {sx:.2e} / {sy:.2e}"
        ),
    )
}

fn short_horizon() -> Check {
    let times = linspace(5.0, 100);
    let sol = fit(
        &growth(),
        &TrainingGrid::integers(10),
        &KernelSpec::baseline(),
        &SolverConfig::default(),
    )?;
    let (ex, ey) = growth_errors(&sol, &times);
    verdict(
        ex <= 1e-2 && ey <= 1e-2,
        format!("on [0, 5]: max eps_x {ex:.3e}, max eps_y {ey:.3e} (<= 1e-2)"),
    )
}

fn asset_pricing() -> Check {
    let p = AssetParams::baseline();
    let model = make_asset_pricing(p.x0, p.c, p.g, p.r).unwrap();
    let sol = fit(
        &model,
        &TrainingGrid::integers(40),
        &KernelSpec::baseline(),
        &SolverConfig::default(),
    )?;
    let mut worst: f64 = 0.0;
    for t in linspace(40.0, 400) {
        let fundamental = asset_pricing_fundamental(&p, t).unwrap();
        let mu = evaluate_solution(&sol, t).unwrap().mu[0];
        worst = worst.max((mu - fundamental).abs() / fundamental.abs());
    }
    let tv = transversality_at(&sol, 200.0).unwrap()[0].abs();
    verdict(
        worst <= 1e-2 && tv <= 1e-4,
        format!("max relative error of the price {worst:.3e} (<= 1e-2), transversality at t=200 {tv:.2e} (<= 1e-4)"),
    )
}

fn skiba() -> Check {
    let (a, big_a, b1, b2) = (1.0 / 3.0, 0.5, 3.0, 2.5);
    let base = make_skiba_growth(1.0, 0.1, 0.11, a, big_a, b1, b2).unwrap();
    let threshold = Technology::ConcaveConvex {
        a,
        scale: big_a,
        b1,
        b2,
    }
    .kink()
    .unwrap();
    let states = steady_states(&base, &default_search_box(&base), 64).map_err(|e| e.to_string())?;
    if states.len() != 2 {
        return Err(format!("expected two steady states, found {}", states.len()));
    }
    let x0s: Vec<f64> = (0..10)
        .map(|i| 0.5 + 3.5 * i as f64 / 9.0)
        .filter(|x| (x - threshold).abs() > 0.05)
        .collect();
    let mut correct = 0;
    let mut wrong = Vec::new();
    for &x0 in &x0s {
        let model = base.with_initial_state(vec![x0]).unwrap();
        let expected = usize::from(x0 > threshold);
        let reached = fit(
            &model,
            &TrainingGrid::integers(40),
            &KernelSpec::baseline(),
            &SolverConfig::default(),
        )
        .ok()
        .and_then(|sol| steady_state_membership(&evaluate_solution(&sol, 40.0).unwrap().x, &states, 0.05));
        if reached == Some(expected) {
            correct += 1;
        } else {
            wrong.push(format!("{x0:.3}"));
        }
    }
    verdict(
        correct == x0s.len() && x0s.len() == 10,
        format!(
            "{correct}/{} reach the steady state on their side of {threshold:.6} (low {:.4}, high {:.4}); wrong: [{}]",
            x0s.len(),
            states[0].x_ss[0],
            states[1].x_ss[0],
            wrong.join(", ")
        ),
    )
}

fn divergence() -> Check {
    let model = growth();
    let mu_star = shooting_solve(&model, 40.0, &[1.0], 1e-14).unwrap().mu0[0];
    let mut rates = Vec::new();
    let mut pass = true;
    for bump in [1.01, 1.02, 1.05, 1.10, 1.20] {
        let path = integrate_ivp(&model, &[1.0], &[mu_star * bump], 300.0, 1e-10).map_err(|e| e.to_string())?;
        let rate = divergence_rate(&model, &path).unwrap().tail_rate[0];
        pass &= rate > 0.11;
        rates.push(format!("{rate:.4}"));
    }
    let p = AssetParams::baseline();
    let asset = make_asset_pricing(p.x0, p.c, p.g, p.r).unwrap();
    let mut bubble = Vec::new();
    for zeta in [0.1, 0.5, 1.0] {
        let mu0 = asset_pricing_fundamental(&p, 0.0).unwrap() + zeta;
        let path = integrate_ivp(&asset, &[p.x0], &[mu0], 100.0, 1e-10).map_err(|e| e.to_string())?;
        let rate = divergence_rate(&asset, &path).unwrap().tail_rate[0];
        pass &= (rate - 0.1).abs() <= 1e-3;
        bubble.push(format!("{rate:.5}"));
    }
    verdict(
        pass,
        format!(
            "growth tail rates [{}] (> 0.11); bubble tail rates [{}] (0.1 +- 1e-3)",
            rates.join(", "),
            bubble.join(", ")
        ),
    )
}

fn ridge_path() -> Check {
    let fit_at = |lambda: f64| {
        let cfg = SolverConfig {
            ridge_lambda: lambda,
            residual_tolerance: 1e-9,
            ..Default::default()
        };
        fit(&growth(), &TrainingGrid::integers(40), &KernelSpec::baseline(), &cfg)
    };
    let (a, b) = (fit_at(1e-4)?, fit_at(1e-6)?);
    let mut sup: f64 = 0.0;
    for t in linspace(40.0, 400) {
        let (ea, eb) = (evaluate_solution(&a, t).unwrap(), evaluate_solution(&b, t).unwrap());
        let va = ea.x.iter().chain(&ea.mu).chain(&ea.y);
        let vb = eb.x.iter().chain(&eb.mu).chain(&eb.y);
        sup = va.zip(vb).fold(sup, |s, (p, q)| s.max((p - q).abs()));
    }
    verdict(
        sup <= 1e-3,
        format!("sup-norm difference of (x, mu, y) on [0, 40]: {sup:.3e} (<= 1e-3)"),
    )
}

fn consistency() -> Check {
    let times = linspace(40.0, 400);
    let bench = benchmark(&times);
    let n_list = [8, 12, 20, 41];
    let rep = consistency_sweep(
        &growth(),
        &KernelSpec::baseline(),
        &SolverConfig::default(),
        40.0,
        &n_list,
        Sampling::Equispaced,
        0,
        Some(&bench),
    )
    .map_err(|e| e.to_string())?;
    let errs: Vec<f64> = (0..n_list.len())
        .map(|i| rep.max_error(i, "x").unwrap().max(rep.max_error(i, "y").unwrap()))
        .collect();
    let norms: Vec<f64> = rep.cells.iter().map(|c| c.norm_sq_total).collect();
    let drift = (norms[2] / norms[3] - 1.0).abs();
    // 10% slack for noise in the error sequence
    let monotone = errs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    verdict(
        drift <= 0.2 && monotone,
        format!(
            "max errors {:?}, norms {:?}; N=20 vs N=41 norm drift {:.1}% (<= 20%)",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            norms.iter().map(|n| format!("{n:.4}")).collect::<Vec<_>>(),
            100.0 * drift
        ),
    )
}

/// Converged, bounded on `[0, 1.5 T]`, transversality at 200.
fn property_check(
    name: &str,
    model: &ModelSpec,
    grid: &TrainingGrid,
    cfg: &SolverConfig,
) -> Result<(bool, String), String> {
    let start = Instant::now();
    let sol = fit(model, grid, &KernelSpec::baseline(), cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let bounded = linspace(1.5 * grid.horizon(), 400).iter().all(|&t| {
        let e = evaluate_solution(&sol, t).unwrap();
        e.x.iter()
            .chain(&e.mu)
            .chain(&e.y)
            .all(|v| v.is_finite() && v.abs() <= 1e3)
    });
    let tv = transversality_at(&sol, 200.0)
        .unwrap()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let pass = bounded && tv <= 1e-4 && secs <= 60.0;
    Ok((
        pass,
        format!("{name}: converged, bounded {bounded}, transversality {tv:.2e}, {secs:.1} s"),
    ))
}

fn other_models() -> Check {
    let hc_params = HumanCapitalParams::default();
    let hc_cfg = SolverConfig {
        residual_tolerance: 1e-8,
        ..Default::default()
    };
    let (hc_ok, hc) = property_check(
        "human capital",
        &make_human_capital(hc_params).unwrap(),
        &TrainingGrid::integers(80),
        &hc_cfg,
    )?;
    let adv_model = make_optimal_advertising(0.4, 0.11, 0.5, 0.05, 0.5).unwrap();
    let (adv_ok, adv) = property_check(
        "advertising",
        &adv_model,
        &TrainingGrid::integers(40),
        &SolverConfig::default(),
    )?;
    let xh = human_capital_initial_xh(&hc_params, hc_params.x_k0).map_err(|e| e.to_string())?;
    let xh_ok = (xh - 1.37).abs() <= 0.01;
    verdict(
        hc_ok && adv_ok && xh_ok,
        format!("{hc}; {adv}; no-arbitrage x_h(0) = {xh:.5} (1.37 +- 0.01)"),
    )
}

fn hygiene() -> Check {
    let mut notes = Vec::new();
    let mut pass = true;

    let mut min_eig = f64::INFINITY;
    for nu in [0.5, 1.5, 2.5] {
        for ell in [2.0, 10.0] {
            for seed in 0..4 {
                let k = KernelSpec::matern(nu, ell, 1.0).unwrap();
                let grid = TrainingGrid::uniform_iid(40.0, 30, seed).unwrap();
                let eig = gram_matrix(&k, &grid)
                    .entries()
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .min();
                min_eig = min_eig.min(eig);
            }
        }
    }
    pass &= min_eig >= -1e-10;
    notes.push(format!("Gram min eigenvalue {min_eig:.1e}"));

    let mut worst_integral: f64 = 0.0;
    for nu in [0.5, 1.5, 2.5] {
        for ell in [2.0, 10.0, 20.0] {
            let k = KernelSpec::matern(nu, ell, 1.0).unwrap();
            for upper in [0.5, 5.0, 17.3, 40.0] {
                for center in [0.0, 3.0, 20.0, 40.0] {
                    let closed = k.integral(upper, center).unwrap();
                    worst_integral = worst_integral.max((closed - k.quadrature_integral(upper, center, 1e-13)).abs());
                }
            }
        }
    }
    pass &= worst_integral <= 1e-10;
    notes.push(format!("kernel integral vs quadrature {worst_integral:.1e}"));

    let model = growth();
    let grid = TrainingGrid::new((0..8).map(|i| 5.0 * i as f64).collect()).unwrap();
    let mut worst_grad: f64 = 0.0;
    for nu in [0.5, 1.5, 2.5] {
        let kernel = KernelSpec::matern(nu, 10.0, 1.0).unwrap();
        let cfg = SolverConfig {
            ridge_lambda: 1e-3,
            penalize_jump_derivatives: true,
            ..Default::default()
        };
        let mut params = initial_parameters(&model, &grid, &cfg).unwrap();
        let n = params.len();
        for (i, p) in params.iter_mut().enumerate().take(n - 2) {
            *p += 0.03 * (1.7 * i as f64).sin();
        }
        let grad = objective_gradient(&model, &grid, &kernel, &cfg, &params).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let (mut up, mut down) = (params.clone(), params.clone());
            up[i] += h;
            down[i] -= h;
            let fu = assemble_objective(&model, &grid, &kernel, &cfg, &up).unwrap().0;
            let fd = assemble_objective(&model, &grid, &kernel, &cfg, &down).unwrap().0;
            let diff = (fu - fd) / (2.0 * h);
            let scale = grad[i].abs().max(diff.abs()).max(1e-3);
            worst_grad = worst_grad.max((grad[i] - diff).abs() / scale);
        }
    }
    pass &= worst_grad <= 1e-5;
    notes.push(format!("gradient vs central differences {worst_grad:.1e} relative"));

    let tol = 1e-10;
    let mut worst_h: f64 = 0.0;
    let mut paths = Vec::new();
    for x0 in [0.5, 1.0, 2.0, 3.0] {
        let m = model.with_initial_state(vec![x0]).unwrap();
        let saddle = shooting_solve(&m, 40.0, &[1.0], 1e-12).map_err(|e| e.to_string())?.mu0[0];
        // on the saddle path and above it; below it capital runs out
        for bump in [1.0, 1.05] {
            paths.push((m.clone(), x0, saddle * bump));
        }
    }
    let adv = make_optimal_advertising(0.4, 0.11, 0.5, 0.05, 0.5).unwrap();
    let adv_saddle = shooting_solve(&adv, 40.0, &[1.0], 1e-12)
        .map_err(|e| e.to_string())?
        .mu0[0];
    paths.push((adv, 0.4, adv_saddle));
    for (m, x0, mu0) in paths {
        let path = integrate_ivp(&m, &[x0], &[mu0], 20.0, tol).map_err(|e| e.to_string())?;
        for i in 0..path.len() {
            worst_h = worst_h.max(m.equations(&path.x[i], &path.mu[i], &path.y[i]).h[0].abs());
        }
    }
    pass &= worst_h <= 10.0 * tol;
    notes.push(format!("|H| along IVP paths {worst_h:.1e} (<= {:.0e})", 10.0 * tol));

    verdict(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("baseline growth accuracy and runtime", baseline_growth),
        ("robustness table", robustness_table),
        ("sparse grid", sparse_grid),
        ("short horizon", short_horizon),
        ("asset pricing without a boundary condition", asset_pricing),
        ("Skiba basins", skiba),
        ("divergence rates of non-solutions", divergence),
        ("ridge path stability", ridge_path),
        ("consistency in N", consistency),
        ("human capital and advertising", other_models),
        ("numerical hygiene", hygiene),
    ];
    let mut unexpected = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let expected_fail = EXPECTED_FAIL.contains(&id);
        let label = match (&result, expected_fail) {
            (Ok(_), false) => "PASS",
            (Ok(_), true) => {
                unexpected += 1;
                "XPASS (listed as expected failure)"
            }
            (Err(_), true) => "FAIL (expected)",
            (Err(_), false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        let detail = result.unwrap_or_else(|e| e);
        println!("criterion {id:>2} {label}: {name}: {detail} [{secs:.1} s]");
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria did not match their expected outcome");
        ExitCode::FAILURE
    }
}
