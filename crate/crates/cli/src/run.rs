//! Runs one configured experiment and writes its CSV outputs.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use ridgeless::diagnostics::{
    consistency_sweep, robustness_sweep, steady_state_membership, sweep_rows, transversality_residual, CsvRow,
    Sampling, SweepReport, CSV_COLUMNS,
};
use ridgeless::reference::{
    asset_pricing_fundamental, bvp_collocation, default_search_box, linspace, relative_error, sample_solution,
    shooting_solve_to, steady_states, AssetParams, BvpOptions, SteadyState,
};
use ridgeless::solver::{evaluate_solution, solution_norms, solve, KernelSolution};
use ridgeless::{Error, ModelSpec, Trajectory};

use crate::config::{ExperimentConfig, ExperimentKind, GridMode, ModelName, Software};
use crate::error::CliError;
use crate::plot::emit_plot_data;

/// Points of the dense evaluation grid on `[0, 1.5 T]`.
pub const EVAL_POINTS: usize = 401;
pub const EXTRAPOLATION_FACTOR: f64 = 1.5;
/// Relative band around a steady state that counts as having reached it.
pub const MEMBERSHIP_TOL: f64 = 0.05;

pub const SOLUTION_FILE: &str = "solution.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PLOT_DIR: &str = "plot";

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

/// Full-precision rendering: 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn row_record(row: &CsvRow) -> Vec<String> {
    vec![
        cell(row.t),
        row.variable.clone(),
        cell(row.value),
        cell(row.rel_error),
        cell(row.norm_sq),
        cell(row.nu),
        cell(row.ell),
        row.n.map(|n| n.to_string()).unwrap_or_default(),
        row.seed.map(|s| s.to_string()).unwrap_or_default(),
        row.status.clone(),
    ]
}

pub fn write_csv(path: &Path, header: &[&str], records: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_rows(path: &Path, rows: &[CsvRow]) -> Result<(), CliError> {
    write_csv(path, &CSV_COLUMNS, &rows.iter().map(row_record).collect::<Vec<_>>())
}

/// Runs `config`, writing every output into `directory`.
pub fn run_experiment(config: &ExperimentConfig, directory: &Path) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(directory).map_err(|e| CliError::io(directory, e))?;
    let mut out = RunOutcome {
        directory: directory.to_path_buf(),
        files: Vec::new(),
        summary: Vec::new(),
    };
    let result = match config.experiment.kind {
        ExperimentKind::Solve => run_solve(config, &mut out, false),
        ExperimentKind::ShootingCompare => run_solve(config, &mut out, true),
        ExperimentKind::SweepInitialConditions => run_initial_conditions(config, &mut out),
        ExperimentKind::Robustness | ExperimentKind::Consistency => run_sweep(config, &mut out),
    };
    // the manifest is written even when the fit failed to converge
    let mut manifest = config.clone();
    manifest.software = Some(Software {
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
    });
    let path = directory.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_toml()).map_err(|e| CliError::io(&path, e))?;
    out.files.push(path);
    result.map(|()| out)
}

fn fit(config: &ExperimentConfig, model: &ModelSpec) -> Result<(KernelSolution, bool), CliError> {
    match solve(
        model,
        &config.training_grid()?,
        &config.kernel_spec()?,
        &config.solver_config(),
    ) {
        Ok(sol) => Ok((sol, true)),
        Err(Error::NonConvergence(sol)) => Ok((*sol, false)),
        Err(e) => Err(e.into()),
    }
}

fn nearest_steady_state(model: &ModelSpec) -> Result<SteadyState, CliError> {
    let x0 = model.initial_state();
    let dist = |s: &SteadyState| s.x_ss.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    steady_states(model, &default_search_box(model), 64)?
        .into_iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .ok_or_else(|| CliError::Numerical("no steady state in the search box".into()))
}

/// Benchmark trajectory on `times`, or `None` when the model has no oracle.
/// Asset pricing only has an oracle for the price, returned with `x` and `y`
/// left empty.
fn oracle(config: &ExperimentConfig, model: &ModelSpec, times: &[f64]) -> Result<Option<Trajectory>, CliError> {
    let horizon = *times.last().expect("non-empty time grid");
    match config.model.name {
        ModelName::NeoclassicalGrowth | ModelName::OptimalAdvertising => {
            let target = nearest_steady_state(model)?;
            let shot = shooting_solve_to(model, &target, horizon, &target.mu_ss, 1e-14)?;
            Ok(Some(shot.path.sample(times)?))
        }
        ModelName::AssetPricing => {
            let p = &config.model.params;
            let params = AssetParams {
                x0: p.x0.expect("resolved"),
                c: p.c.expect("resolved"),
                g: p.g.expect("resolved"),
                r: p.r.expect("resolved"),
            };
            let mu = times
                .iter()
                .map(|&t| asset_pricing_fundamental(&params, t).map(|v| vec![v]))
                .collect::<ridgeless::Result<Vec<_>>>()?;
            Ok(Some(Trajectory {
                times: times.to_vec(),
                x: Vec::new(),
                mu,
                y: Vec::new(),
                xdot: None,
                mudot: None,
            }))
        }
        ModelName::SkibaGrowth | ModelName::HumanCapital => Ok(None),
    }
}

/// Rows of `errors.csv`: the oracle value and the relative error of the fit.
fn error_rows(candidate: &Trajectory, reference: &Trajectory, names: &[String]) -> Result<Vec<CsvRow>, CliError> {
    let m = candidate.x[0].len();
    let p = candidate.y[0].len();
    let mut rows = Vec::new();
    for i in 0..reference.len() {
        let mut pairs = Vec::new();
        if !reference.x.is_empty() {
            pairs.extend((0..m).map(|k| (k, candidate.x[i][k], reference.x[i][k])));
        }
        pairs.extend((0..m).map(|k| (m + k, candidate.mu[i][k], reference.mu[i][k])));
        if !reference.y.is_empty() {
            pairs.extend((0..p).map(|k| (2 * m + k, candidate.y[i][k], reference.y[i][k])));
        }
        for (v, got, want) in pairs {
            if want.abs() <= 1e-8 {
                return Err(Error::ZeroDenominator {
                    variable: names[v].clone(),
                    time: reference.times[i],
                }
                .into());
            }
            rows.push(CsvRow {
                t: Some(reference.times[i]),
                variable: names[v].clone(),
                value: Some(want),
                rel_error: Some((got - want).abs() / want.abs()),
                status: "ok".into(),
                ..CsvRow::default()
            });
        }
    }
    Ok(rows)
}

fn max_error_by_variable(rows: &[CsvRow], names: &[String], up_to: f64) -> Vec<(String, f64)> {
    names
        .iter()
        .filter_map(|n| {
            let errs = rows
                .iter()
                .filter(|r| &r.variable == n && r.t.is_some_and(|t| t <= up_to));
            let mut any = false;
            let max = errs.fold(0.0f64, |a, r| {
                any = true;
                a.max(r.rel_error.unwrap_or(f64::NAN))
            });
            any.then(|| (n.clone(), max))
        })
        .collect()
}

fn run_solve(config: &ExperimentConfig, out: &mut RunOutcome, compare: bool) -> Result<(), CliError> {
    let model = config.model_spec()?;
    let (sol, converged) = fit(config, &model)?;
    let status = if converged { "ok" } else { "non-converged" };
    let horizon = sol.grid.horizon();
    let times = linspace(EXTRAPOLATION_FACTOR * horizon, EVAL_POINTS - 1);
    let names = model.variable_names();
    let norms = solution_norms(&sol);
    let (nu, ell) = (sol.kernel.smoothness().nu(), sol.kernel.lengthscale());

    let mut rows = Vec::new();
    for &t in &times {
        let e = evaluate_solution(&sol, t)?;
        let levels = e.x.iter().chain(&e.mu).chain(&e.y);
        let rates = e.xdot.iter().chain(&e.mudot).chain(&e.ydot);
        for (v, (level, rate)) in levels.zip(rates).enumerate() {
            let base = CsvRow {
                t: Some(t),
                nu: Some(nu),
                ell: Some(ell),
                n: Some(sol.grid.len()),
                seed: Some(config.grid.seed),
                status: status.into(),
                ..CsvRow::default()
            };
            rows.push(CsvRow {
                variable: names[v].clone(),
                value: Some(*level),
                ..base.clone()
            });
            rows.push(CsvRow {
                variable: format!("d{}", names[v]),
                value: Some(*rate),
                norm_sq: Some(norms[v]),
                ..base
            });
        }
    }
    let solution_path = out.directory.join(SOLUTION_FILE);
    write_rows(&solution_path, &rows)?;
    out.files.push(solution_path.clone());

    let tv = transversality_residual(&sol, config.experiment.horizon, 50)?;
    out.summary.push(format!(
        "fit {status}: {} iterations, mean squared residual {:e}, transversality at t = {} is {:e}",
        sol.fit_report.iterations,
        sol.fit_report.mean_squared_residual,
        config.experiment.horizon,
        tv.terminal_max()
    ));

    let mut errors_path = None;
    if let Some(reference) = oracle(config, &model, &times)? {
        let candidate = sample_solution(&sol, &times)?;
        let err_rows = error_rows(&candidate, &reference, &names)?;
        let path = out.directory.join(ERRORS_FILE);
        write_rows(&path, &err_rows)?;
        out.files.push(path.clone());
        for (name, max) in max_error_by_variable(&err_rows, &names, horizon) {
            out.summary
                .push(format!("max relative error of {name} on [0, {horizon}]: {max:e}"));
        }
        errors_path = Some(path);

        if compare {
            let bvp_horizon = BvpOptions::default().horizon.max(EXTRAPOLATION_FACTOR * horizon);
            let opts = BvpOptions {
                horizon: bvp_horizon,
                ..BvpOptions::default()
            };
            let bvp = bvp_collocation(&model, &nearest_steady_state(&model)?, &opts)?;
            let bvp_on_times = ridgeless::reference::interpolate_trajectory(&bvp, &times)?;
            let kernel_report = relative_error(&candidate, &reference, &names)?;
            let bvp_report = relative_error(&bvp_on_times, &reference, &names)?;
            let mut report = Vec::new();
            for (method, rep) in [("kernel", &kernel_report), ("bvp", &bvp_report)] {
                let window = rep.window(0.0, horizon);
                for (v, name) in window.variables.iter().enumerate() {
                    report.push(CsvRow {
                        variable: format!("{method}:{name}:max"),
                        value: Some(window.max[v]),
                        rel_error: Some(window.max[v]),
                        nu: Some(nu),
                        ell: Some(ell),
                        n: Some(sol.grid.len()),
                        seed: Some(config.grid.seed),
                        status: "ok".into(),
                        ..CsvRow::default()
                    });
                }
            }
            let path = out.directory.join(REPORT_FILE);
            write_rows(&path, &report)?;
            out.files.push(path);
        }
    } else if compare {
        return Err(CliError::Config {
            field: "experiment.kind".into(),
            message: "shooting-compare needs a model with a shooting benchmark".into(),
        });
    }

    if config.output.emit_plot_data {
        let plot_dir = out.directory.join(PLOT_DIR);
        let files = emit_plot_data(&solution_path, errors_path.as_deref(), &plot_dir, horizon)?;
        out.files.extend(files);
    }
    if converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "mean squared residual {:e} above tolerance {:e}",
            sol.fit_report.mean_squared_residual, config.solver.residual_tolerance
        )))
    }
}

fn run_initial_conditions(config: &ExperimentConfig, out: &mut RunOutcome) -> Result<(), CliError> {
    let model = config.model_spec()?;
    let states = steady_states(&model, &default_search_box(&model), 64)?;
    let x0_list = config.experiment.x0_list.clone().expect("validated");
    let horizon = config.training_grid()?.horizon();
    let kernel = config.kernel_spec()?;
    let cells: Vec<Result<Vec<String>, CliError>> = x0_list
        .par_iter()
        .map(|&x0| {
            let m = model.with_initial_state(vec![x0])?;
            let (sol, converged) = match fit(config, &m) {
                Ok(v) => v,
                Err(CliError::Numerical(msg)) => {
                    let mut rec = row_record(&CsvRow {
                        t: Some(horizon),
                        variable: "x".into(),
                        nu: Some(kernel.smoothness().nu()),
                        ell: Some(kernel.lengthscale()),
                        n: Some(config.training_grid()?.len()),
                        seed: Some(config.grid.seed),
                        status: format!("failed: {msg}"),
                        ..CsvRow::default()
                    });
                    rec.extend([format_float(x0), String::new()]);
                    return Ok(rec);
                }
                Err(e) => return Err(e),
            };
            let terminal = evaluate_solution(&sol, horizon)?.x;
            let member = steady_state_membership(&terminal, &states, MEMBERSHIP_TOL);
            let rel = member.map(|k| (terminal[0] - states[k].x_ss[0]).abs() / states[k].x_ss[0].abs());
            let mut rec = row_record(&CsvRow {
                t: Some(horizon),
                variable: "x".into(),
                value: Some(terminal[0]),
                rel_error: rel,
                norm_sq: Some(solution_norms(&sol).iter().sum()),
                nu: Some(kernel.smoothness().nu()),
                ell: Some(kernel.lengthscale()),
                n: Some(sol.grid.len()),
                seed: Some(config.grid.seed),
                status: if converged { "ok" } else { "non-converged" }.into(),
            });
            rec.extend([
                format_float(x0),
                member.map(|k| k.to_string()).unwrap_or_else(|| "none".into()),
            ]);
            Ok(rec)
        })
        .collect();
    let records = cells.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut header = CSV_COLUMNS.to_vec();
    header.extend(["x0", "steady_state"]);
    let path = out.directory.join(REPORT_FILE);
    write_csv(&path, &header, &records)?;
    out.files.push(path);
    for (k, s) in states.iter().enumerate() {
        let count = records.iter().filter(|r| r[11] == k.to_string()).count();
        out.summary.push(format!(
            "steady state {k} at x = {:.6}: reached from {count} initial conditions",
            s.x_ss[0]
        ));
    }
    Ok(())
}

fn run_sweep(config: &ExperimentConfig, out: &mut RunOutcome) -> Result<(), CliError> {
    let model = config.model_spec()?;
    let horizon = config.horizon();
    let times = linspace(horizon, EVAL_POINTS - 1);
    let reference = match config.model.name {
        // the asset oracle covers the price only; sweeps compare every variable
        ModelName::AssetPricing => None,
        _ => oracle(config, &model, &times)?,
    };
    let solver = config.solver_config();
    let report: SweepReport = match config.experiment.kind {
        ExperimentKind::Robustness => {
            let cells = config.experiment.nu_ell_grid.clone().expect("validated");
            robustness_sweep(
                &model,
                &config.training_grid()?,
                &cells,
                config.kernel.sigma,
                &solver,
                reference.as_ref(),
            )?
        }
        ExperimentKind::Consistency => {
            let sampling = match config.grid.mode {
                GridMode::UniformIid => Sampling::UniformIid,
                _ => Sampling::Equispaced,
            };
            let n_list = config.experiment.n_list.clone().expect("validated");
            let kernel = config.kernel_spec()?;
            consistency_sweep(
                &model,
                &kernel,
                &solver,
                horizon,
                &n_list,
                sampling,
                config.grid.seed,
                reference.as_ref(),
            )?
        }
        _ => unreachable!("only sweep kinds reach here"),
    };
    let path = out.directory.join(REPORT_FILE);
    write_rows(&path, &sweep_rows(&report))?;
    out.files.push(path);
    for (i, c) in report.cells.iter().enumerate() {
        let errs: Vec<String> = report
            .variables
            .iter()
            .filter_map(|v| report.max_error(i, v).map(|e| format!("{v} {e:.3e}")))
            .collect();
        out.summary.push(format!(
            "nu = {}, ell = {}, N = {}: {} norm² {:.6} {}",
            c.nu,
            c.ell,
            c.n,
            c.status.label(),
            c.norm_sq_total,
            errs.join(", ")
        ));
    }
    info!("sweep finished with {} cells", report.cells.len());
    Ok(())
}
