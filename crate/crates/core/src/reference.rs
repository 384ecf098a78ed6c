//! Independent oracles: IVP integration with the jump variables eliminated,
//! steady states, shooting, a finite-difference boundary-value solver, the
//! closed-form fundamental asset price, and relative-error metrics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::ivp::{self, OdeOptions, OdeSolution, Stop};
use crate::model::{solve_jump, Bounds, HumanCapitalParams, ModelSpec, Trajectory};
use crate::quadrature;
use crate::solver::{evaluate_solution, KernelSolution};

/// Absolute tolerance on `H` when recovering jump variables.
const JUMP_TOL: f64 = 1e-13;

fn initial_jump_guess(model: &ModelSpec) -> Vec<f64> {
    let m = model.state_dim();
    (0..model.jump_dim())
        .map(|k| model.bounds().clamp(2 * m + k, 1.0))
        .collect()
}

/// Solution of the reduced ODE in `(x, μ)` plus the jump values at each
/// accepted step.
#[derive(Clone, Debug)]
pub struct ReferencePath {
    model: ModelSpec,
    solution: OdeSolution,
    jumps: Vec<Vec<f64>>,
}

impl ReferencePath {
    pub fn end_time(&self) -> f64 {
        self.solution.end_time()
    }

    /// `true` when the run stopped before its horizon.
    pub fn stopped_early(&self) -> bool {
        self.solution.stop == Some(Stop::Event)
    }

    pub fn ode_solution(&self) -> &OdeSolution {
        &self.solution
    }

    /// Values at the accepted integration steps.
    pub fn trajectory(&self) -> Trajectory {
        let m = self.model.state_dim();
        Trajectory {
            times: self.solution.times.clone(),
            x: self.solution.states.iter().map(|s| s[..m].to_vec()).collect(),
            mu: self.solution.states.iter().map(|s| s[m..].to_vec()).collect(),
            y: self.jumps.clone(),
            xdot: Some(self.solution.derivatives.iter().map(|d| d[..m].to_vec()).collect()),
            mudot: Some(self.solution.derivatives.iter().map(|d| d[m..].to_vec()).collect()),
        }
    }

    /// Dense output at `times`: Hermite-interpolated `(x, μ)` and `y`
    /// re-solved from `H = 0`.
    pub fn sample(&self, times: &[f64]) -> Result<Trajectory> {
        let m = self.model.state_dim();
        let mut out = Trajectory::default();
        for &t in times {
            let state = self.solution.interpolate(t).ok_or_else(|| {
                Error::Domain(format!(
                    "t = {t} lies outside the integrated span [0, {}]",
                    self.end_time()
                ))
            })?;
            let k = self.solution.times.partition_point(|&s| s <= t).max(1) - 1;
            let (x, mu) = state.split_at(m);
            let y = solve_jump(&self.model, x, mu, &self.jumps[k], JUMP_TOL).map_err(|_| Error::NewtonFailure {
                time: t,
                residual: f64::NAN,
            })?;
            let eq = self.model.equations(x, mu, &y);
            let r = self.model.discount_rate();
            out.times.push(t);
            out.xdot.get_or_insert_with(Vec::new).push(eq.f.clone());
            out.mudot
                .get_or_insert_with(Vec::new)
                .push((0..m).map(|i| r * mu[i] - eq.mu_g[i]).collect());
            out.x.push(x.to_vec());
            out.mu.push(mu.to_vec());
            out.y.push(y);
        }
        Ok(out)
    }
}

/// Integrates the reduced ODE from `(x0, μ0)`. `stop` is evaluated on
/// `(t, x, μ)` after every accepted step.
pub fn integrate_path<S>(
    model: &ModelSpec,
    x0: &[f64],
    mu0: &[f64],
    horizon: f64,
    tol: f64,
    mut stop: S,
) -> Result<ReferencePath>
where
    S: FnMut(f64, &[f64], &[f64]) -> bool,
{
    let m = model.state_dim();
    for (context, got) in [("integrate_ivp x0", x0.len()), ("integrate_ivp mu0", mu0.len())] {
        if got != m {
            return Err(Error::DimensionMismatch {
                context,
                expected: m,
                got,
            });
        }
    }
    let y0 = solve_jump(model, x0, mu0, &initial_jump_guess(model), JUMP_TOL).map_err(|e| with_time(e, 0.0))?;
    let r = model.discount_rate();
    let warm = std::cell::RefCell::new(y0.clone());
    let rhs = |t: f64, s: &[f64]| -> Result<Vec<f64>> {
        let (x, mu) = s.split_at(m);
        let guess = warm.borrow().clone();
        let y = solve_jump(model, x, mu, &guess, JUMP_TOL).map_err(|e| with_time(e, t))?;
        let eq = model.equations(x, mu, &y);
        *warm.borrow_mut() = y;
        let mut d = eq.f;
        d.extend((0..m).map(|i| r * mu[i] - eq.mu_g[i]));
        Ok(d)
    };
    let start: Vec<f64> = x0.iter().chain(mu0).copied().collect();
    let options = OdeOptions {
        max_step: (horizon / 20.0).max(1e-3),
        ..OdeOptions::with_tolerance(tol)
    };
    let solution = ivp::dopri5(rhs, 0.0, &start, horizon, &options, |t, s| stop(t, &s[..m], &s[m..]))?;

    let mut jumps = Vec::with_capacity(solution.times.len());
    let mut guess = y0;
    for (t, s) in solution.times.iter().zip(&solution.states) {
        let y = solve_jump(model, &s[..m], &s[m..], &guess, JUMP_TOL).map_err(|e| with_time(e, *t))?;
        guess.clone_from(&y);
        jumps.push(y);
    }
    Ok(ReferencePath {
        model: model.clone(),
        solution,
        jumps,
    })
}

fn with_time(err: Error, time: f64) -> Error {
    match err {
        Error::NewtonFailure { residual, .. } => Error::NewtonFailure { time, residual },
        other => other,
    }
}

/// Adaptive RK45 integration of the DAE from `(x0, μ0)` to `horizon`.
pub fn integrate_ivp(model: &ModelSpec, x0: &[f64], mu0: &[f64], horizon: f64, tol: f64) -> Result<Trajectory> {
    Ok(integrate_path(model, x0, mu0, horizon, tol, |_, _, _| false)?.trajectory())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub x_ss: Vec<f64>,
    pub mu_ss: Vec<f64>,
    pub y_ss: Vec<f64>,
    pub residual_norm: f64,
}

impl SteadyState {
    fn stacked(&self) -> Vec<f64> {
        self.x_ss.iter().chain(&self.mu_ss).chain(&self.y_ss).copied().collect()
    }
}

/// Deterministic low-discrepancy point in the unit cube.
fn halton(index: usize, dim: usize) -> f64 {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let base = PRIMES[dim % PRIMES.len()];
    let (mut f, mut r, mut i) = (1.0, 0.0, index + 1);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn newton_steady(model: &ModelSpec, start: Vec<f64>, search_box: &Bounds) -> Option<Vec<f64>> {
    let norm = |v: &[f64]| {
        v.iter().fold(
            0.0f64,
            |a, b| if b.is_finite() { a.max(b.abs()) } else { f64::INFINITY },
        )
    };
    let mut z = start;
    let mut res = model.steady_residual(&z);
    let mut current = norm(&res);
    for _ in 0..200 {
        if current <= 1e-13 {
            break;
        }
        let jac = model.steady_jacobian(&z);
        let rhs = DVector::from_vec(res.clone());
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let n = z.len();
                (jac.tr_mul(&jac) + DMatrix::identity(n, n) * 1e-8)
                    .cholesky()?
                    .solve(&jac.tr_mul(&rhs))
            }
        };
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let inside = trial.iter().enumerate().all(|(i, &v)| model.bounds().contains(i, v));
            if inside {
                let rt = model.steady_residual(&trial);
                let nt = norm(&rt);
                if nt < current {
                    z = trial;
                    res = rt;
                    current = nt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
    }
    let inside = z.iter().enumerate().all(|(i, &v)| search_box.contains(i, v));
    (current <= 1e-10 && inside).then_some(z)
}

/// Multi-start damped Newton on `[F; rμ − μ⊙G; H] = 0` from `n_starts`
/// quasi-random points in `search_box` (over `z = (x, μ, y)`, finite).
/// Roots closer than 1e-6 are merged; the result is sorted by `x`.
pub fn steady_states(model: &ModelSpec, search_box: &Bounds, n_starts: usize) -> Result<Vec<SteadyState>> {
    let n = model.n_vars();
    if search_box.lower.len() != n || search_box.upper.len() != n {
        return Err(Error::DimensionMismatch {
            context: "steady-state search box",
            expected: n,
            got: search_box.lower.len(),
        });
    }
    if (0..n).any(|i| !(search_box.lower[i].is_finite() && search_box.upper[i].is_finite())) {
        return Err(Error::InvalidParameter("steady-state search box must be finite".into()));
    }
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for s in 0..n_starts {
        let start: Vec<f64> = (0..n)
            .map(|d| search_box.lower[d] + halton(s, d) * (search_box.upper[d] - search_box.lower[d]))
            .collect();
        if let Some(z) = newton_steady(model, start, search_box) {
            let dist = |a: &[f64]| a.iter().zip(&z).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            if roots.iter().all(|r| dist(r) > 1e-6) {
                roots.push(z);
            }
        }
    }
    roots.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let m = model.state_dim();
    Ok(roots
        .into_iter()
        .map(|z| {
            let residual_norm = model.steady_residual(&z).iter().fold(0.0f64, |a, b| a.max(b.abs()));
            SteadyState {
                x_ss: z[..m].to_vec(),
                mu_ss: z[m..2 * m].to_vec(),
                y_ss: z[2 * m..].to_vec(),
                residual_norm,
            }
        })
        .collect())
}

/// A converged shooting run.
#[derive(Clone, Debug)]
pub struct ShootingSolution {
    pub mu0: Vec<f64>,
    pub path: ReferencePath,
    pub target: SteadyState,
    /// `[x(T) − x*; μ(T) − μ*; y(T) − y*]` at the shooting horizon, NaN
    /// components when the final run stopped early.
    pub terminal_mismatch: Vec<f64>,
    /// Spectral norm of `∂Ψ/∂μ₀` estimated by finite differences.
    pub sensitivity: f64,
    /// Condition number of `∂Ψ/∂μ₀` (1 for a single column).
    pub condition: f64,
}

/// Integrates until `horizon` or until the path clearly leaves the
/// neighbourhood of `target`.
fn shoot(model: &ModelSpec, target: &SteadyState, mu0: &[f64], horizon: f64, tol: f64) -> Result<ReferencePath> {
    let x0 = model.initial_state().to_vec();
    let bounds = model.bounds().clone();
    let m = model.state_dim();
    let scale_x: Vec<f64> = (0..m)
        .map(|i| 4.0 * (x0[i] - target.x_ss[i]).abs().max(target.x_ss[i].abs()).max(1e-3))
        .collect();
    let scale_mu: Vec<f64> = (0..m)
        .map(|i| 10.0 * target.mu_ss[i].abs().max(mu0[i].abs()).max(1e-3))
        .collect();
    integrate_path(model, &x0, mu0, horizon, tol, |_, x, mu| {
        (0..m).any(|i| {
            (x[i] - target.x_ss[i]).abs() > scale_x[i]
                || (mu[i] - target.mu_ss[i]).abs() > scale_mu[i]
                || !bounds.contains(i, x[i])
                || !bounds.contains(m + i, mu[i])
        })
    })
}

/// Side decisions integrate this many shooting horizons (or until escape),
/// so the root sits on the saddle path rather than on `μ(T) = μ*`.
const DECISION_FACTOR: f64 = 4.0;

/// Jacobian of `(ẋ, μ̇)` at a steady state with `y` eliminated through
/// `H = 0`.
pub fn reduced_jacobian(model: &ModelSpec, target: &SteadyState) -> Result<DMatrix<f64>> {
    let m = model.state_dim();
    let p = model.jump_dim();
    let full = model.steady_jacobian(&target.stacked());
    let a = full.view((0, 0), (2 * m, 2 * m)).into_owned();
    if p == 0 {
        return Ok(a);
    }
    let b = full.view((0, 2 * m), (2 * m, p));
    let hz = full.view((2 * m, 0), (p, 2 * m));
    let hy = full.view((2 * m, 2 * m), (p, p)).into_owned();
    let dy = hy
        .lu()
        .solve(&hz.into_owned())
        .ok_or_else(|| Error::Domain("singular H_y at the steady state".into()))?;
    Ok(a - b * dy)
}

/// Left eigenvector of the unstable eigenvalue of a planar saddle, signed
/// so that its co-state component is positive. Its sign on a deviation
/// tells which side of the stable manifold the deviation lies on.
fn unstable_normal(model: &ModelSpec, target: &SteadyState) -> [f64; 2] {
    let fallback = [0.0, 1.0];
    let Ok(j) = reduced_jacobian(model, target) else {
        return fallback;
    };
    let (tr, det) = (j[(0, 0)] + j[(1, 1)], j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)]);
    let disc = tr * tr - 4.0 * det;
    if !(disc > 0.0) {
        return fallback;
    }
    let lambda = 0.5 * (tr + disc.sqrt());
    // rows of (Jᵀ − λI) are parallel; take the better conditioned one
    let (r0, r1) = ([j[(0, 0)] - lambda, j[(1, 0)]], [j[(0, 1)], j[(1, 1)] - lambda]);
    let row = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) {
        r0
    } else {
        r1
    };
    let mut w = [-row[1], row[0]];
    if w[1] < 0.0 || (w[1] == 0.0 && w[0] < 0.0) {
        w = [-w[0], -w[1]];
    }
    w
}

/// Side of the stable manifold of `target` on which the path from `μ₀`
/// ends: the sign of the unstable-normal projection of the final deviation.
/// The run stops on escape from the target's neighbourhood, at a model
/// bound, on an integration failure (last accepted state), or at
/// `DECISION_FACTOR · horizon`.
fn side(model: &ModelSpec, target: &SteadyState, mu0: f64, horizon: f64, tol: f64) -> f64 {
    let horizon = DECISION_FACTOR * horizon;
    let x0 = model.initial_state().to_vec();
    let w = unstable_normal(model, target);
    let mut last = (x0[0], mu0);
    let result = integrate_path(model, &x0, &[mu0], horizon, tol, |_, x, mu| {
        last = (x[0], mu[0]);
        let far_x =
            (x[0] - target.x_ss[0]).abs() > 4.0 * (x0[0] - target.x_ss[0]).abs().max(target.x_ss[0].abs()).max(1e-3);
        let far_mu = (mu[0] - target.mu_ss[0]).abs() > 10.0 * target.mu_ss[0].abs().max(mu0.abs()).max(1e-3);
        far_x || far_mu || !model.bounds().contains(0, x[0]) || !model.bounds().contains(1, mu[0])
    });
    let (x, mu) = match result {
        Ok(path) => {
            let s = path.ode_solution().states.last().expect("non-empty");
            (s[0], s[1])
        }
        Err(_) => last,
    };
    (w[0] * (x - target.x_ss[0]) + w[1] * (mu - target.mu_ss[0])).signum()
}

fn terminal_mismatch(path: &ReferencePath, target: &SteadyState, horizon: f64) -> Vec<f64> {
    let n = target.stacked().len();
    if path.stopped_early() || path.end_time() < horizon {
        return vec![f64::NAN; n];
    }
    let traj = path.trajectory();
    let k = traj.len() - 1;
    traj.x[k]
        .iter()
        .chain(&traj.mu[k])
        .chain(&traj.y[k])
        .zip(target.stacked())
        .map(|(a, b)| a - b)
        .collect()
}

/// Bisection on `μ₀` for a scalar co-state, between two values whose
/// trajectories leave `target` on opposite sides.
pub fn shooting_bisect(
    model: &ModelSpec,
    target: &SteadyState,
    horizon: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<ShootingSolution> {
    if model.state_dim() != 1 {
        return Err(Error::InvalidParameter(
            "bisection shooting needs a scalar co-state".into(),
        ));
    }
    let ode_tol = 1e-12;
    let (mut lo, mut hi) = bracket;
    let (s_lo, s_hi) = (
        side(model, target, lo, horizon, ode_tol),
        side(model, target, hi, horizon, ode_tol),
    );
    if s_lo == s_hi {
        return Err(Error::NoBracket { lower: lo, upper: hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol * mid.abs().max(1e-300) || mid == lo || mid == hi {
            break;
        }
        if side(model, target, mid, horizon, ode_tol) == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu0 = 0.5 * (lo + hi);
    finish_shooting(model, target, vec![mu0], horizon, ode_tol)
}

fn finish_shooting(
    model: &ModelSpec,
    target: &SteadyState,
    mu0: Vec<f64>,
    horizon: f64,
    ode_tol: f64,
) -> Result<ShootingSolution> {
    let path = shoot(model, target, &mu0, horizon, ode_tol)?;
    let mismatch = terminal_mismatch(&path, target, horizon);
    // sensitivity over a quarter of the horizon, where perturbed runs stay finite
    let probe = horizon / 4.0;
    let base = shoot(model, target, &mu0, probe, ode_tol)
        .ok()
        .map(|p| terminal_mismatch(&p, target, probe));
    let m = mu0.len();
    let mut cols = Vec::new();
    if let Some(base) = base.filter(|b| b.iter().all(|v| v.is_finite())) {
        for i in 0..m {
            let h = 1e-7 * mu0[i].abs().max(1e-3);
            let mut bumped = mu0.clone();
            bumped[i] += h;
            if let Ok(p) = shoot(model, target, &bumped, probe, ode_tol) {
                let b = terminal_mismatch(&p, target, probe);
                cols.push(b.iter().zip(&base).map(|(u, v)| (u - v) / h).collect::<Vec<f64>>());
            }
        }
    }
    let (sensitivity, condition) = if cols.len() == m && m > 0 {
        let jac = DMatrix::from_fn(cols[0].len(), m, |r, c| cols[c][r]);
        let sv = jac.svd(false, false).singular_values;
        let (max, min) = (sv.max(), sv.min());
        (max, if min > 0.0 { max / min } else { f64::INFINITY })
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ShootingSolution {
        mu0,
        path,
        target: target.clone(),
        terminal_mismatch: mismatch,
        sensitivity,
        condition,
    })
}

/// Expands a bracket around `guess` until the two ends leave `target` on
/// opposite sides.
fn find_bracket(model: &ModelSpec, target: &SteadyState, guess: f64, horizon: f64) -> Result<(f64, f64)> {
    let s0 = side(model, target, guess, horizon, 1e-12);
    for factor in [1.02, 1.05, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0] {
        for cand in [guess * factor, guess / factor] {
            if side(model, target, cand, horizon, 1e-12) != s0 {
                return Ok(if cand < guess { (cand, guess) } else { (guess, cand) });
            }
        }
    }
    Err(Error::NoBracket {
        lower: guess / 10.0,
        upper: guess * 10.0,
    })
}

fn damped_newton_shooting(
    model: &ModelSpec,
    target: &SteadyState,
    guess: &[f64],
    horizon: f64,
    tol: f64,
) -> Result<ShootingSolution> {
    let ode_tol = 1e-12;
    let psi = |mu0: &[f64]| -> Result<DVector<f64>> {
        let path = shoot(model, target, mu0, horizon, ode_tol)?;
        let v = terminal_mismatch(&path, target, horizon);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::ShootingDiverged(format!(
                "trajectory from mu0 = {mu0:?} left the target neighbourhood at t = {}",
                path.end_time()
            )));
        }
        Ok(DVector::from_vec(v))
    };
    let m = guess.len();
    let mut mu0 = guess.to_vec();
    let mut f = psi(&mu0)?;
    for _ in 0..100 {
        if f.amax() <= tol {
            return finish_shooting(model, target, mu0, horizon, ode_tol);
        }
        let mut jac = DMatrix::zeros(f.len(), m);
        for i in 0..m {
            let h = 1e-7 * mu0[i].abs().max(1e-3);
            let mut bumped = mu0.clone();
            bumped[i] += h;
            let fb = psi(&bumped)?;
            jac.set_column(i, &((fb - &f) / h));
        }
        let a = jac.tr_mul(&jac) + DMatrix::identity(m, m) * 1e-12;
        let step = a
            .cholesky()
            .ok_or_else(|| Error::ShootingDiverged("singular shooting Jacobian".into()))?
            .solve(&jac.tr_mul(&f));
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = mu0.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            if let Ok(ft) = psi(&trial) {
                if ft.norm() < f.norm() {
                    mu0 = trial;
                    f = ft;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Err(Error::ShootingDiverged("line search failed".into()));
            }
        }
    }
    Err(Error::ShootingDiverged("shooting Newton did not converge".into()))
}

/// Shooting towards `target`: bisection for `M = 1`, damped Gauss–Newton on
/// the full terminal mismatch otherwise.
pub fn shooting_solve_to(
    model: &ModelSpec,
    target: &SteadyState,
    horizon: f64,
    mu0_guess: &[f64],
    tol: f64,
) -> Result<ShootingSolution> {
    if mu0_guess.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "shooting mu0 guess",
            expected: model.state_dim(),
            got: mu0_guess.len(),
        });
    }
    if model.state_dim() == 1 {
        let bracket = find_bracket(model, target, mu0_guess[0], horizon)?;
        shooting_bisect(model, target, horizon, bracket, tol)
    } else {
        damped_newton_shooting(model, target, mu0_guess, horizon, tol)
    }
}

/// Default finite search box for steady states: model bounds clipped to
/// `[-50, 50]` (positive lower bounds raised to 1e-3).
pub fn default_search_box(model: &ModelSpec) -> Bounds {
    let b = model.bounds();
    Bounds {
        lower: b
            .lower
            .iter()
            .map(|&l| if l >= 0.0 { l.max(1e-3) } else { l.max(-50.0) })
            .collect(),
        upper: b.upper.iter().map(|&u| u.min(50.0)).collect(),
    }
}

/// Shooting towards the steady state whose state is closest to `x₀`.
pub fn shooting_solve(model: &ModelSpec, horizon: f64, mu0_guess: &[f64], tol: f64) -> Result<ShootingSolution> {
    let x0 = model.initial_state();
    let states = steady_states(model, &default_search_box(model), 64)?;
    let dist = |s: &SteadyState| s.x_ss.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let target = states
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .ok_or_else(|| Error::ShootingDiverged("model has no steady state in the search box".into()))?;
    shooting_solve_to(model, target, horizon, mu0_guess, tol)
}

/// All saddle paths from `x₀` towards any of `targets`, found by scanning
/// `μ₀` on a log grid over `scan`, bisecting every sign change, and keeping
/// the roots whose trajectory reaches its target at the horizon.
pub fn saddle_paths(
    model: &ModelSpec,
    targets: &[SteadyState],
    horizon: f64,
    scan: (f64, f64, usize),
    tol: f64,
) -> Result<Vec<ShootingSolution>> {
    if model.state_dim() != 1 {
        return Err(Error::InvalidParameter(
            "saddle path scan needs a scalar co-state".into(),
        ));
    }
    let (lo, hi, n) = scan;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::InvalidParameter(format!("invalid scan range ({lo}, {hi}, {n})")));
    }
    let grid: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    let mut out = Vec::new();
    for target in targets {
        let sides: Vec<f64> = grid
            .par_iter()
            .map(|&g| side(model, target, g, horizon, 1e-12))
            .collect();
        for i in 0..n - 1 {
            if sides[i] == sides[i + 1] {
                continue;
            }
            let Ok(sol) = shooting_bisect(model, target, horizon, (grid[i], grid[i + 1]), tol) else {
                continue;
            };
            // the true saddle path has closed most of the initial gap by T
            let gap = (model.initial_state()[0] - target.x_ss[0]).abs();
            let reached = sol.terminal_mismatch[0].abs() <= 0.1 * gap + 1e-6;
            if reached {
                out.push(sol);
            }
        }
    }
    Ok(out)
}

/// `∫₀^T e^{-rt} u(x, y) dt + e^{-rT} u(x*, y*)/r` along a shooting path,
/// by composite Simpson on the dense output.
pub fn discounted_payoff(model: &ModelSpec, sol: &ShootingSolution, horizon: f64) -> Result<f64> {
    let intervals = 4000;
    let h = horizon / intervals as f64;
    let times: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
    let traj = sol.path.sample(&times)?;
    let r = model.discount_rate();
    let payoff = |x: &[f64], y: &[f64]| {
        model
            .system()
            .flow_payoff(x, y)
            .ok_or_else(|| Error::InvalidParameter(format!("model {} has no flow payoff", model.name())))
    };
    let mut total = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * (-r * t).exp() * payoff(&traj.x[i], &traj.y[i])?;
    }
    let tail = (-r * horizon).exp() * payoff(&sol.target.x_ss, &sol.target.y_ss)? / r;
    Ok(total * h / 3.0 + tail)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvpOptions {
    pub horizon: f64,
    pub intervals: usize,
    /// Newton tolerance on the discrete residual (max norm).
    pub tol: f64,
    /// Combine `n` and `2n` interval solutions to cancel the O(h²) term.
    pub richardson: bool,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            horizon: 80.0,
            intervals: 4000,
            tol: 1e-11,
            richardson: true,
        }
    }
}

/// Trapezoidal finite-difference solution of the two-point problem
/// `x(0) = x₀`, `x(T) = x*`, with `H = 0` at every node. Returns values at
/// the `intervals + 1` nodes.
pub fn bvp_collocation(model: &ModelSpec, target: &SteadyState, options: &BvpOptions) -> Result<Trajectory> {
    let coarse = bvp_trapezoid(model, target, options.horizon, options.intervals, options.tol, None)?;
    if !options.richardson {
        return Ok(coarse);
    }
    let fine = bvp_trapezoid(
        model,
        target,
        options.horizon,
        2 * options.intervals,
        options.tol,
        Some(&coarse),
    )?;
    let mut out = coarse.clone();
    let combine = |c: &[f64], f: &[f64]| -> Vec<f64> { c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect() };
    for k in 0..out.len() {
        out.x[k] = combine(&coarse.x[k], &fine.x[2 * k]);
        out.mu[k] = combine(&coarse.mu[k], &fine.mu[2 * k]);
        out.y[k] = combine(&coarse.y[k], &fine.y[2 * k]);
    }
    out.xdot = None;
    out.mudot = None;
    Ok(out)
}

fn bvp_trapezoid(
    model: &ModelSpec,
    target: &SteadyState,
    horizon: f64,
    intervals: usize,
    tol: f64,
    warm: Option<&Trajectory>,
) -> Result<Trajectory> {
    let m = model.state_dim();
    let p = model.jump_dim();
    let nv = 2 * m + p;
    let nodes = intervals + 1;
    let h = horizon / intervals as f64;
    let r = model.discount_rate();
    let x0 = model.initial_state();
    let times: Vec<f64> = (0..nodes).map(|k| k as f64 * h).collect();

    // initial guess: given warm start, else an exponential blend towards the target
    let mut w = vec![0.0; nodes * nv];
    for (k, &t) in times.iter().enumerate() {
        let z = &mut w[k * nv..(k + 1) * nv];
        match warm {
            Some(tr) => {
                let state = interpolate_nodes(tr, t);
                z.copy_from_slice(&state);
            }
            None => {
                let blend = (-t / 5.0).exp();
                for i in 0..m {
                    z[i] = target.x_ss[i] + (x0[i] - target.x_ss[i]) * blend;
                    z[m + i] = target.mu_ss[i];
                }
                for i in 0..p {
                    z[2 * m + i] = target.y_ss[i];
                }
                let y = solve_jump(model, &z[..m], &z[m..2 * m], &target.y_ss, JUMP_TOL)
                    .unwrap_or_else(|_| target.y_ss.clone());
                z[2 * m..].copy_from_slice(&y);
            }
        }
    }

    let phi = |z: &[f64]| -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
        let eq = model.equations(&z[..m], &z[m..2 * m], &z[2 * m..]);
        let mut d = eq.f;
        d.extend((0..m).map(|i| r * z[m + i] - eq.mu_g[i]));
        (d, eq.h, model.steady_jacobian(z))
    };

    let n_unknowns = nodes * nv;
    for _ in 0..50 {
        // equations: x(0) = x₀ (M), then per node H (P), per interval the
        // trapezoid rule (2M), finally x(T) = x* (M)
        let mut res = vec![0.0; n_unknowns];
        let mut jac = BandMatrix::zeros(n_unknowns, 2 * nv, 2 * nv);
        let evals: Vec<_> = (0..nodes).map(|k| phi(&w[k * nv..(k + 1) * nv])).collect();
        let mut row = 0;
        for i in 0..m {
            res[row] = w[i] - x0[i];
            jac.set(row, i, 1.0);
            row += 1;
        }
        for k in 0..nodes {
            let (_, hk, jk) = &evals[k];
            for i in 0..p {
                res[row] = hk[i];
                for c in 0..nv {
                    jac.set(row, k * nv + c, jk[(2 * m + i, c)]);
                }
                row += 1;
            }
            if k + 1 < nodes {
                let (da, _, ja) = &evals[k];
                let (db, _, jb) = &evals[k + 1];
                for i in 0..2 * m {
                    res[row] = w[(k + 1) * nv + i] - w[k * nv + i] - 0.5 * h * (da[i] + db[i]);
                    for c in 0..nv {
                        jac.set(row, k * nv + c, -0.5 * h * ja[(i, c)] - if c == i { 1.0 } else { 0.0 });
                        jac.set(
                            row,
                            (k + 1) * nv + c,
                            -0.5 * h * jb[(i, c)] + if c == i { 1.0 } else { 0.0 },
                        );
                    }
                    row += 1;
                }
            }
        }
        for i in 0..m {
            res[row] = w[(nodes - 1) * nv + i] - target.x_ss[i];
            jac.set(row, (nodes - 1) * nv + i, 1.0);
            row += 1;
        }
        debug_assert_eq!(row, n_unknowns);
        let err = res.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if !err.is_finite() {
            return Err(Error::Domain("BVP residual became non-finite".into()));
        }
        if err <= tol {
            return Ok(nodes_to_trajectory(&times, &w, m, p));
        }
        let step = jac.solve(&res)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let ok = (0..nodes).all(|k| {
                let (d, hk, _) = phi(&trial[k * nv..(k + 1) * nv]);
                d.iter().chain(&hk).all(|v| v.is_finite())
            });
            if ok || t < 1e-6 {
                w = trial;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Domain("BVP Newton iteration did not converge".into()))
}

fn interpolate_nodes(tr: &Trajectory, t: f64) -> Vec<f64> {
    let k = tr.times.partition_point(|&s| s <= t).clamp(1, tr.len() - 1) - 1;
    let (t0, t1) = (tr.times[k], tr.times[k + 1]);
    let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect() };
    let mut z = lerp(&tr.x[k], &tr.x[k + 1]);
    z.extend(lerp(&tr.mu[k], &tr.mu[k + 1]));
    z.extend(lerp(&tr.y[k], &tr.y[k + 1]));
    z
}

/// Piecewise-linear resampling of a node trajectory; errors outside its span.
pub fn interpolate_trajectory(tr: &Trajectory, times: &[f64]) -> Result<Trajectory> {
    tr.validate()?;
    if tr.len() < 2 {
        return Err(Error::InvalidParameter("interpolation needs at least two nodes".into()));
    }
    let (first, last) = (tr.times[0], *tr.times.last().expect("non-empty"));
    let (m, p) = (tr.x[0].len(), tr.y[0].len());
    let mut w = Vec::with_capacity(times.len() * (2 * m + p));
    for &t in times {
        if !(t >= first && t <= last) {
            return Err(Error::Domain(format!("t = {t} lies outside [{first}, {last}]")));
        }
        w.extend(interpolate_nodes(tr, t));
    }
    Ok(nodes_to_trajectory(times, &w, m, p))
}

fn nodes_to_trajectory(times: &[f64], w: &[f64], m: usize, p: usize) -> Trajectory {
    let nv = 2 * m + p;
    let block = |k: usize, a: usize, b: usize| w[k * nv + a..k * nv + b].to_vec();
    Trajectory {
        times: times.to_vec(),
        x: (0..times.len()).map(|k| block(k, 0, m)).collect(),
        mu: (0..times.len()).map(|k| block(k, m, 2 * m)).collect(),
        y: (0..times.len()).map(|k| block(k, 2 * m, nv)).collect(),
        xdot: None,
        mudot: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssetParams {
    pub x0: f64,
    pub c: f64,
    pub g: f64,
    pub r: f64,
}

impl AssetParams {
    pub fn baseline() -> Self {
        Self {
            x0: 1.0,
            c: 0.02,
            g: -0.2,
            r: 0.1,
        }
    }

    /// Dividend path `x(t) = −c/g + (x₀ + c/g) e^{gt}` (`x₀ + ct` when g = 0).
    pub fn dividend(&self, t: f64) -> f64 {
        if self.g == 0.0 {
            self.x0 + self.c * t
        } else {
            -self.c / self.g + (self.x0 + self.c / self.g) * (self.g * t).exp()
        }
    }
}

/// Present value `∫₀^∞ e^{-rτ} x(t + τ) dτ` of the dividend stream.
pub fn asset_pricing_fundamental(params: &AssetParams, t: f64) -> Result<f64> {
    let AssetParams { c, g, r, .. } = *params;
    if !(r > g) || !(r > 0.0) {
        return Err(Error::Domain(format!(
            "fundamental price needs r > max(g, 0), got r = {r}, g = {g}"
        )));
    }
    let x = params.dividend(t);
    if g == 0.0 {
        return Ok(x / r + c / (r * r));
    }
    Ok((-c / g) / r + (x + c / g) / (r - g))
}

/// The same present value by adaptive quadrature, truncated where
/// `e^{-rτ} < 1e-14`.
pub fn asset_pricing_fundamental_quadrature(params: &AssetParams, t: f64) -> Result<f64> {
    let r = params.r;
    if !(r > params.g) || !(r > 0.0) {
        return Err(Error::Domain(format!(
            "fundamental price needs r > max(g, 0), got r = {r}, g = {}",
            params.g
        )));
    }
    let tail = 14.0 * std::f64::consts::LN_10 / r;
    // panels of a few decay lengths keep the local tolerance meaningful
    let panels = 32;
    let width = tail / panels as f64;
    Ok((0..panels)
        .map(|k| {
            let a = k as f64 * width;
            quadrature::integrate(|tau| (-r * tau).exp() * params.dividend(t + tau), a, a + width, 1e-15)
        })
        .sum())
}

/// Per-variable relative error paths and their extremes.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub variables: Vec<String>,
    /// `errors[v][i] = |ŵ_v(t_i) − w_v(t_i)| / |w_v(t_i)|`.
    pub errors: Vec<Vec<f64>>,
    pub max: Vec<f64>,
    pub min: Vec<f64>,
}

impl ErrorReport {
    pub fn max_for(&self, variable: &str) -> Option<f64> {
        self.variables.iter().position(|v| v == variable).map(|i| self.max[i])
    }

    pub fn min_for(&self, variable: &str) -> Option<f64> {
        self.variables.iter().position(|v| v == variable).map(|i| self.min[i])
    }

    /// Restricts to times in `[from, to]`.
    pub fn window(&self, from: f64, to: f64) -> ErrorReport {
        let keep: Vec<usize> = (0..self.times.len())
            .filter(|&i| self.times[i] >= from && self.times[i] <= to)
            .collect();
        let errors: Vec<Vec<f64>> = self
            .errors
            .iter()
            .map(|e| keep.iter().map(|&i| e[i]).collect())
            .collect();
        ErrorReport {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            variables: self.variables.clone(),
            max: errors.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect(),
            min: errors
                .iter()
                .map(|e| e.iter().copied().fold(f64::INFINITY, f64::min))
                .collect(),
            errors,
        }
    }
}

/// Relative errors of `candidate` against `reference` at matching times.
/// `names` labels the components in `(x, μ, y)` order.
pub fn relative_error(candidate: &Trajectory, reference: &Trajectory, names: &[String]) -> Result<ErrorReport> {
    candidate.validate()?;
    reference.validate()?;
    if candidate.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            context: "relative_error times",
            expected: reference.len(),
            got: candidate.len(),
        });
    }
    if let Some(i) = (0..reference.len())
        .find(|&i| (candidate.times[i] - reference.times[i]).abs() > 1e-12 * (1.0 + reference.times[i].abs()))
    {
        return Err(Error::InvalidParameter(format!(
            "candidate time {} does not match reference time {}",
            candidate.times[i], reference.times[i]
        )));
    }
    let stack =
        |tr: &Trajectory, i: usize| -> Vec<f64> { tr.x[i].iter().chain(&tr.mu[i]).chain(&tr.y[i]).copied().collect() };
    let width = if reference.is_empty() {
        names.len()
    } else {
        stack(reference, 0).len()
    };
    if names.len() != width {
        return Err(Error::DimensionMismatch {
            context: "relative_error variable names",
            expected: width,
            got: names.len(),
        });
    }
    let mut errors = vec![Vec::with_capacity(reference.len()); width];
    for i in 0..reference.len() {
        let (c, r) = (stack(candidate, i), stack(reference, i));
        if c.len() != width {
            return Err(Error::DimensionMismatch {
                context: "relative_error candidate width",
                expected: width,
                got: c.len(),
            });
        }
        for v in 0..width {
            if r[v].abs() <= 1e-8 {
                return Err(Error::ZeroDenominator {
                    variable: names[v].clone(),
                    time: reference.times[i],
                });
            }
            errors[v].push(((c[v] - r[v]) / r[v]).abs());
        }
    }
    Ok(ErrorReport {
        times: reference.times.clone(),
        variables: names.to_vec(),
        max: errors.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect(),
        min: errors
            .iter()
            .map(|e| e.iter().copied().fold(f64::INFINITY, f64::min))
            .collect(),
        errors,
    })
}

/// Samples a kernel solution at `times`.
pub fn sample_solution(sol: &KernelSolution, times: &[f64]) -> Result<Trajectory> {
    let mut out = Trajectory::default();
    let (mut xd, mut md) = (Vec::new(), Vec::new());
    for &t in times {
        let e = evaluate_solution(sol, t)?;
        out.times.push(t);
        out.x.push(e.x);
        out.mu.push(e.mu);
        out.y.push(e.y);
        xd.push(e.xdot);
        md.push(e.mudot);
    }
    out.xdot = Some(xd);
    out.mudot = Some(md);
    Ok(out)
}

/// `n + 1` equally spaced times on `[0, horizon]`.
pub fn linspace(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Human capital level `x_h` equating the net returns on both stocks,
/// `f_h − δ_h = f_k − δ_k`, for a given physical capital `x_k`.
pub fn human_capital_initial_xh(params: &HumanCapitalParams, x_k: f64) -> Result<f64> {
    let HumanCapitalParams {
        a_k,
        a_h,
        delta_k,
        delta_h,
        ..
    } = *params;
    if !(x_k > 0.0) {
        return Err(Error::Domain(format!("x_k must be positive, got {x_k}")));
    }
    let gap = |x_h: f64| {
        let f = x_k.powf(a_k) * x_h.powf(a_h);
        (a_h * f / x_h - delta_h) - (a_k * f / x_k - delta_k)
    };
    // the gap falls from +∞ as x_h grows; bisect on a log scale
    let (mut lo, mut hi) = (1e-8, 1e8);
    if !(gap(lo) > 0.0 && gap(hi) < 0.0) {
        return Err(Error::NoBracket { lower: lo, upper: hi });
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}
