//! Observable consequences of the theory: transversality residuals,
//! divergence rates of non-solutions, sweeps over grids and kernels, and
//! the Skiba threshold.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, TrainingGrid};
use crate::model::{ModelSpec, Trajectory};
use crate::reference::{discounted_payoff, relative_error, saddle_paths, sample_solution, SteadyState};
use crate::solver::{evaluate_solution, solution_norms, solve, KernelSolution, SolverConfig};

/// `e^{-rt} x(t) ⊙ μ(t)` along a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TransversalityReport {
    pub times: Vec<f64>,
    /// `values[i][m]` at `times[i]`.
    pub values: Vec<Vec<f64>>,
    pub terminal: Vec<f64>,
}

impl TransversalityReport {
    /// Largest terminal component in absolute value.
    pub fn terminal_max(&self) -> f64 {
        self.terminal.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// `n_points` times: zero followed by log-spaced points ending at `horizon`.
pub fn log_times(horizon: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![horizon],
        _ => {
            let first = (horizon / 1000.0).min(1.0);
            let mut out = vec![0.0];
            let k = n_points - 1;
            out.extend((0..k).map(|i| {
                if k == 1 {
                    horizon
                } else {
                    first * (horizon / first).powf(i as f64 / (k - 1) as f64)
                }
            }));
            *out.last_mut().expect("non-empty") = horizon;
            out
        }
    }
}

/// Transversality residual of a kernel solution up to `horizon ≥ T`.
pub fn transversality_residual(sol: &KernelSolution, horizon: f64, n_points: usize) -> Result<TransversalityReport> {
    if !(horizon >= sol.grid.horizon()) {
        return Err(Error::InvalidParameter(format!(
            "transversality horizon {horizon} lies before the grid horizon {}",
            sol.grid.horizon()
        )));
    }
    let times = log_times(horizon, n_points.max(1));
    let values = times
        .iter()
        .map(|&t| transversality_at(sol, t))
        .collect::<Result<Vec<_>>>()?;
    let terminal = values.last().cloned().unwrap_or_default();
    Ok(TransversalityReport {
        times,
        values,
        terminal,
    })
}

/// `e^{-rt} x̂(t) ⊙ μ̂(t)` at a single time.
pub fn transversality_at(sol: &KernelSolution, t: f64) -> Result<Vec<f64>> {
    let r = sol.model.discount_rate();
    let e = evaluate_solution(sol, t)?;
    Ok(e.x.iter().zip(&e.mu).map(|(x, m)| (-r * t).exp() * x * m).collect())
}

/// Growth rates `μ̇/μ` per co-state component.
#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    pub times: Vec<f64>,
    /// `rates[m][i]`; NaN from the first zero crossing of `μ^{(m)}` on.
    pub rates: Vec<Vec<f64>>,
    /// Time-averaged rate over the last 20% of the window, NaN when the
    /// component is undefined there.
    pub tail_rate: Vec<f64>,
    pub discount_rate: f64,
}

impl DivergenceReport {
    /// `true` when some component's tail rate exceeds `r`.
    pub fn exceeds_discount_rate(&self) -> bool {
        self.tail_rate.iter().any(|&v| v > self.discount_rate)
    }
}

/// Logarithmic growth of the co-states along `trajectory`. Missing `μ̇` is
/// recomputed from the co-state equation.
pub fn divergence_rate(model: &ModelSpec, trajectory: &Trajectory) -> Result<DivergenceReport> {
    trajectory.validate()?;
    if trajectory.len() < 2 {
        return Err(Error::InvalidParameter(
            "divergence rate needs at least two times".into(),
        ));
    }
    let m = model.state_dim();
    let r = model.discount_rate();
    let mudot: Vec<Vec<f64>> = match &trajectory.mudot {
        Some(d) => d.clone(),
        None => (0..trajectory.len())
            .map(|i| {
                let eq = model.equations(&trajectory.x[i], &trajectory.mu[i], &trajectory.y[i]);
                (0..m).map(|k| r * trajectory.mu[i][k] - eq.mu_g[k]).collect()
            })
            .collect(),
    };
    let times = trajectory.times.clone();
    let mut rates = vec![Vec::with_capacity(times.len()); m];
    for k in 0..m {
        let sign0 = trajectory.mu[0][k].signum();
        let mut crossed = false;
        for i in 0..times.len() {
            let mu = trajectory.mu[i][k];
            crossed |= mu == 0.0 || mu.signum() != sign0;
            rates[k].push(if crossed { f64::NAN } else { mudot[i][k] / mu });
        }
    }
    let (t0, t1) = (times[0], *times.last().expect("non-empty"));
    let from = t1 - 0.2 * (t1 - t0);
    let tail_rate = rates
        .iter()
        .map(|series| {
            let (mut area, mut span) = (0.0, 0.0);
            for i in 1..times.len() {
                if times[i] <= from {
                    continue;
                }
                let a = times[i - 1].max(from);
                let h = times[i] - a;
                let left = if times[i - 1] >= from {
                    series[i - 1]
                } else {
                    let s = (from - times[i - 1]) / (times[i] - times[i - 1]);
                    series[i - 1] + s * (series[i] - series[i - 1])
                };
                area += 0.5 * h * (left + series[i]);
                span += h;
            }
            if span > 0.0 {
                area / span
            } else {
                series.last().copied().unwrap_or(f64::NAN)
            }
        })
        .collect();
    Ok(DivergenceReport {
        times,
        rates,
        tail_rate,
        discount_rate: r,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    Equispaced,
    UniformIid,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok,
    /// The fit missed the residual tolerance; metrics describe the best iterate.
    NonConverged,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NonConverged => "non-converged",
            CellStatus::Failed(_) => "failed",
        }
    }
}

/// One sweep configuration and its metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub nu: f64,
    pub ell: f64,
    pub seed: u64,
    pub status: CellStatus,
    /// Per variable, in the model's `(x, μ, y)` order; empty without an oracle.
    pub max_rel_error: Vec<f64>,
    pub min_rel_error: Vec<f64>,
    /// `Σ ‖·‖²_H` over every derivative expansion.
    pub norm_sq_total: f64,
    pub mean_squared_residual: f64,
    pub runtime_secs: f64,
}

impl SweepCell {
    fn failed(n: usize, kernel: &KernelSpec, seed: u64, why: String) -> Self {
        Self {
            n,
            nu: kernel.smoothness().nu(),
            ell: kernel.lengthscale(),
            seed,
            status: CellStatus::Failed(why),
            max_rel_error: Vec::new(),
            min_rel_error: Vec::new(),
            norm_sq_total: f64::NAN,
            mean_squared_residual: f64::NAN,
            runtime_secs: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub variables: Vec<String>,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn max_error(&self, cell: usize, variable: &str) -> Option<f64> {
        let v = self.variables.iter().position(|n| n == variable)?;
        self.cells.get(cell)?.max_rel_error.get(v).copied()
    }
}

fn fit_cell(
    model: &ModelSpec,
    grid: &TrainingGrid,
    kernel: &KernelSpec,
    config: &SolverConfig,
    seed: u64,
    oracle: Option<&Trajectory>,
) -> SweepCell {
    let started = Instant::now();
    let (sol, status) = match solve(model, grid, kernel, config) {
        Ok(sol) => (sol, CellStatus::Ok),
        Err(Error::NonConvergence(sol)) => (*sol, CellStatus::NonConverged),
        Err(e) => return SweepCell::failed(grid.len(), kernel, seed, e.to_string()),
    };
    let (mut max_rel_error, mut min_rel_error) = (Vec::new(), Vec::new());
    if let Some(reference) = oracle {
        let metrics = sample_solution(&sol, &reference.times)
            .and_then(|cand| relative_error(&cand, reference, &model.variable_names()));
        match metrics {
            Ok(rep) => {
                max_rel_error = rep.max;
                min_rel_error = rep.min;
            }
            Err(e) => return SweepCell::failed(grid.len(), kernel, seed, e.to_string()),
        }
    }
    SweepCell {
        n: grid.len(),
        nu: kernel.smoothness().nu(),
        ell: kernel.lengthscale(),
        seed,
        status,
        max_rel_error,
        min_rel_error,
        norm_sq_total: solution_norms(&sol).iter().sum(),
        mean_squared_residual: sol.fit_report.mean_squared_residual,
        runtime_secs: started.elapsed().as_secs_f64(),
    }
}

/// Fits the model for every `N` in `n_list` on `[0, horizon]` and compares
/// against `oracle` at its own times. Cells are independent and run in
/// parallel; failures are recorded per cell.
pub fn consistency_sweep(
    model: &ModelSpec,
    kernel: &KernelSpec,
    config: &SolverConfig,
    horizon: f64,
    n_list: &[usize],
    sampling: Sampling,
    seed: u64,
    oracle: Option<&Trajectory>,
) -> Result<SweepReport> {
    if n_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(format!(
            "N list must be non-decreasing, got {n_list:?}"
        )));
    }
    let cells = n_list
        .par_iter()
        .map(|&n| {
            let grid = match sampling {
                Sampling::Equispaced => TrainingGrid::equispaced(horizon, n),
                Sampling::UniformIid => TrainingGrid::uniform_iid(horizon, n, seed),
            };
            match grid {
                Ok(grid) => fit_cell(model, &grid, kernel, config, seed, oracle),
                Err(e) => SweepCell::failed(n, kernel, seed, e.to_string()),
            }
        })
        .collect();
    Ok(SweepReport {
        variables: model.variable_names(),
        cells,
    })
}

/// Fits the model on a fixed grid for each `(ν, ℓ)` pair (scale `sigma`).
pub fn robustness_sweep(
    model: &ModelSpec,
    grid: &TrainingGrid,
    kernel_grid: &[(f64, f64)],
    sigma: f64,
    config: &SolverConfig,
    oracle: Option<&Trajectory>,
) -> Result<SweepReport> {
    let kernels = kernel_grid
        .iter()
        .map(|&(nu, ell)| KernelSpec::matern(nu, ell, sigma))
        .collect::<Result<Vec<_>>>()?;
    let cells = kernels
        .par_iter()
        .map(|k| fit_cell(model, grid, k, config, config.seed, oracle))
        .collect();
    Ok(SweepReport {
        variables: model.variable_names(),
        cells,
    })
}

/// Index of the steady state whose state lies within `rel_tol` (relative)
/// of `x`, if any.
pub fn steady_state_membership(x: &[f64], states: &[SteadyState], rel_tol: f64) -> Option<usize> {
    states.iter().position(|s| {
        s.x_ss
            .iter()
            .zip(x)
            .all(|(target, v)| (v - target).abs() <= rel_tol * target.abs())
    })
}

/// Index into `targets` of the saddle path from the model's `x₀` with the
/// highest discounted payoff.
pub fn optimal_target(model: &ModelSpec, targets: &[SteadyState], horizon: f64) -> Result<usize> {
    let candidates = saddle_paths(model, targets, horizon, (1e-2, 1e2, 121), 1e-13)?;
    let mut best: Option<(usize, f64)> = None;
    for cand in &candidates {
        let value = discounted_payoff(model, cand, horizon)?;
        let index = targets
            .iter()
            .position(|t| t == &cand.target)
            .expect("target from the list");
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((index, value));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::ShootingDiverged(format!("no saddle path from x0 = {:?}", model.initial_state())))
}

/// Initial state separating the basins of the two steady states, by
/// bisection on which saddle path has the higher value. `bracket` must
/// contain the threshold.
pub fn skiba_threshold(
    model: &ModelSpec,
    targets: &[SteadyState],
    horizon: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64> {
    if model.state_dim() != 1 {
        return Err(Error::InvalidParameter("Skiba threshold needs a scalar state".into()));
    }
    let choice = |x0: f64| -> Result<usize> { optimal_target(&model.with_initial_state(vec![x0])?, targets, horizon) };
    let (mut lo, mut hi) = bracket;
    let low_choice = choice(lo)?;
    if choice(hi)? == low_choice {
        return Err(Error::NoBracket { lower: lo, upper: hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if choice(mid)? == low_choice {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One line of the long-format CSV contract
/// `t, variable, value, rel_error, norm_sq, nu, ell, N, seed, status`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvRow {
    pub t: Option<f64>,
    pub variable: String,
    pub value: Option<f64>,
    pub rel_error: Option<f64>,
    pub norm_sq: Option<f64>,
    pub nu: Option<f64>,
    pub ell: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub status: String,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "t",
    "variable",
    "value",
    "rel_error",
    "norm_sq",
    "nu",
    "ell",
    "N",
    "seed",
    "status",
];

/// Rows for every time and variable of `trajectory`, with `derivative`
/// columns named `d<name>` when present.
pub fn trajectory_rows(
    trajectory: &Trajectory,
    names: &[String],
    errors: Option<&crate::reference::ErrorReport>,
) -> Vec<CsvRow> {
    let m = trajectory.x.first().map_or(0, Vec::len);
    let mut rows = Vec::new();
    for i in 0..trajectory.len() {
        let stacked: Vec<f64> = trajectory.x[i]
            .iter()
            .chain(&trajectory.mu[i])
            .chain(&trajectory.y[i])
            .copied()
            .collect();
        for (v, value) in stacked.iter().enumerate() {
            rows.push(CsvRow {
                t: Some(trajectory.times[i]),
                variable: names[v].clone(),
                value: Some(*value),
                rel_error: errors.and_then(|e| e.errors.get(v).and_then(|s| s.get(i)).copied()),
                status: "ok".into(),
                ..CsvRow::default()
            });
        }
        let derivs = [(&trajectory.xdot, 0), (&trajectory.mudot, m)];
        for (series, offset) in derivs {
            if let Some(d) = series {
                for (k, value) in d[i].iter().enumerate() {
                    rows.push(CsvRow {
                        t: Some(trajectory.times[i]),
                        variable: format!("d{}", names[offset + k]),
                        value: Some(*value),
                        status: "ok".into(),
                        ..CsvRow::default()
                    });
                }
            }
        }
    }
    rows
}

/// One row per cell and variable; cells without an oracle get one row.
pub fn sweep_rows(report: &SweepReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for cell in &report.cells {
        let base = CsvRow {
            norm_sq: Some(cell.norm_sq_total).filter(|v| v.is_finite()),
            nu: Some(cell.nu),
            ell: Some(cell.ell),
            n: Some(cell.n),
            seed: Some(cell.seed),
            status: cell.status.label().to_string(),
            ..CsvRow::default()
        };
        if cell.max_rel_error.is_empty() {
            rows.push(base);
            continue;
        }
        for (v, name) in report.variables.iter().enumerate() {
            rows.push(CsvRow {
                variable: format!("{name}:max"),
                rel_error: cell.max_rel_error.get(v).copied(),
                ..base.clone()
            });
            rows.push(CsvRow {
                variable: format!("{name}:min"),
                rel_error: cell.min_rel_error.get(v).copied(),
                ..base.clone()
            });
        }
    }
    rows
}
