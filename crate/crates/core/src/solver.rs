//! Kernel collocation of a DAE model.
//!
//! Derivatives are kernel machines on the training grid,
//! `ẋ(t) = Σ_j α^x_j k(t, t_j)`, and levels are their running integrals
//! started at `x₀` (fixed) or at the free initial values `μ̂₀`, `ŷ₀`.
//! The coefficients minimise the squared DAE residuals at the grid points
//! plus a small ridge penalty on the RKHS norms of the derivatives.
//!
//! Parameter vector layout: `[α^x (M×N), α^μ (M×N), α^y (P×N), μ̂₀ (M), ŷ₀ (P)]`,
//! each coefficient block contiguous in grid order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::kernel::{
    gram_matrix, integral_matrix, integrated_kernel_row, rkhs_norm_sq, GramMatrix, KernelSpec, TrainingGrid,
};
use crate::lm::{self, LeastSquares, LmOptions, Termination};
use crate::model::{solve_jump, ModelSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Ridge weight λ on the state and co-state derivative norms.
    pub ridge_lambda: f64,
    /// Weight λ_p on the model's extra penalty variables. `None` uses the
    /// model's own weight.
    pub extra_penalty_weight: Option<f64>,
    /// Also penalise every jump-variable derivative norm with weight λ.
    pub penalize_jump_derivatives: bool,
    pub max_iterations: usize,
    /// Acceptance threshold on the mean squared DAE residual over the grid.
    pub residual_tolerance: f64,
    pub step_tolerance: f64,
    /// Standard deviation of the random initial coefficients; 0 starts at zero.
    pub initial_coefficient_scale: f64,
    pub seed: u64,
    pub initial_mu0: Option<Vec<f64>>,
    pub initial_y0: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-6,
            extra_penalty_weight: None,
            penalize_jump_derivatives: false,
            max_iterations: 500,
            residual_tolerance: 1e-10,
            step_tolerance: 1e-13,
            initial_coefficient_scale: 0.0,
            seed: 0,
            initial_mu0: None,
            initial_y0: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")));
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge_lambda must be non-negative, got {}",
                self.ridge_lambda
            )));
        }
        if let Some(w) = self.extra_penalty_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "extra_penalty_weight must be non-negative, got {w}"
                )));
            }
        }
        if !(self.residual_tolerance > 0.0) {
            return bad("residual_tolerance", self.residual_tolerance);
        }
        if !(self.step_tolerance > 0.0) {
            return bad("step_tolerance", self.step_tolerance);
        }
        if !(self.initial_coefficient_scale >= 0.0 && self.initial_coefficient_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial_coefficient_scale must be non-negative, got {}",
                self.initial_coefficient_scale
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Summary of the optimisation run.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    /// Penalised objective (squared residuals plus norm penalties).
    pub objective: f64,
    /// `‖r‖²` over the DAE rows divided by their count.
    pub mean_squared_residual: f64,
    pub max_abs_residual: f64,
    pub termination: Termination,
    pub used_fallback: bool,
    pub converged: bool,
}

/// Fitted coefficients together with everything needed to evaluate them.
#[derive(Clone, Debug)]
pub struct KernelSolution {
    pub kernel: KernelSpec,
    pub grid: TrainingGrid,
    /// Column `m` holds the coefficients of `ẋ^{(m)}`.
    pub alpha_x: DMatrix<f64>,
    pub alpha_mu: DMatrix<f64>,
    pub alpha_y: DMatrix<f64>,
    pub mu0_hat: Vec<f64>,
    pub y0_hat: Vec<f64>,
    pub model: ModelSpec,
    pub fit_report: FitReport,
    gram: GramMatrix,
}

/// Levels and derivatives of a fitted solution at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    pub xdot: Vec<f64>,
    pub mudot: Vec<f64>,
    pub ydot: Vec<f64>,
}

impl KernelSolution {
    /// Builds a solution from a raw parameter vector (layout in the module docs).
    pub fn from_parameters(
        model: &ModelSpec,
        grid: &TrainingGrid,
        kernel: &KernelSpec,
        params: &[f64],
    ) -> Result<Self> {
        let layout = Layout::new(model, grid);
        layout.check(params)?;
        let n = layout.n;
        let block = |b: usize, count: usize| DMatrix::from_fn(n, count, |j, c| params[(b + c) * n + j]);
        let (m, p) = (layout.m, layout.p);
        Ok(Self {
            kernel: *kernel,
            grid: grid.clone(),
            alpha_x: block(0, m),
            alpha_mu: block(m, m),
            alpha_y: block(2 * m, p),
            mu0_hat: params[layout.mu0()..layout.mu0() + m].to_vec(),
            y0_hat: params[layout.y0()..layout.y0() + p].to_vec(),
            model: model.clone(),
            fit_report: FitReport {
                iterations: 0,
                objective: f64::NAN,
                mean_squared_residual: f64::NAN,
                max_abs_residual: f64::NAN,
                termination: Termination::MaxIterations,
                used_fallback: false,
                converged: false,
            },
            gram: gram_matrix(kernel, grid),
        })
    }

    /// Inverse of [`Self::from_parameters`].
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for a in [&self.alpha_x, &self.alpha_mu, &self.alpha_y] {
            for c in 0..a.ncols() {
                out.extend(a.column(c).iter());
            }
        }
        out.extend(&self.mu0_hat);
        out.extend(&self.y0_hat);
        out
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }
}

/// Evaluates the fitted trajectory at `t ≥ 0`. Times past the grid horizon
/// extrapolate; the derivatives decay back to zero there.
pub fn evaluate_solution(sol: &KernelSolution, t: f64) -> Result<Evaluation> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("evaluation time must be non-negative, got {t}")));
    }
    let points = sol.grid.points();
    let krow = DVector::from_iterator(points.len(), points.iter().map(|&tj| sol.kernel.eval(t, tj)));
    let irow = integrated_kernel_row(&sol.kernel, t, &sol.grid)?;
    let level = |alpha: &DMatrix<f64>, start: &[f64]| -> Vec<f64> {
        (0..alpha.ncols())
            .map(|c| {
                if t == 0.0 {
                    start[c]
                } else {
                    start[c] + alpha.column(c).dot(&irow)
                }
            })
            .collect()
    };
    let rate = |alpha: &DMatrix<f64>| -> Vec<f64> { (0..alpha.ncols()).map(|c| alpha.column(c).dot(&krow)).collect() };
    Ok(Evaluation {
        x: level(&sol.alpha_x, sol.model.initial_state()),
        mu: level(&sol.alpha_mu, &sol.mu0_hat),
        y: level(&sol.alpha_y, &sol.y0_hat),
        xdot: rate(&sol.alpha_x),
        mudot: rate(&sol.alpha_mu),
        ydot: rate(&sol.alpha_y),
    })
}

/// `‖·‖²_H` for each derivative expansion: M state, M co-state, P jump.
pub fn solution_norms(sol: &KernelSolution) -> Vec<f64> {
    [&sol.alpha_x, &sol.alpha_mu, &sol.alpha_y]
        .into_iter()
        .flat_map(|a| (0..a.ncols()).map(move |c| a.column(c).iter().copied().collect::<Vec<_>>()))
        .map(|coeffs| rkhs_norm_sq(&sol.gram, &coeffs).expect("coefficients match the grid"))
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    n: usize,
    m: usize,
    p: usize,
}

impl Layout {
    fn new(model: &ModelSpec, grid: &TrainingGrid) -> Self {
        Self {
            n: grid.len(),
            m: model.state_dim(),
            p: model.jump_dim(),
        }
    }

    /// Number of variables per point, `2M + P`.
    fn vars(&self) -> usize {
        2 * self.m + self.p
    }

    fn mu0(&self) -> usize {
        self.vars() * self.n
    }

    fn y0(&self) -> usize {
        self.mu0() + self.m
    }

    fn len(&self) -> usize {
        self.y0() + self.p
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "solver parameter vector",
                expected: self.len(),
                got: params.len(),
            });
        }
        Ok(())
    }
}

/// Per-block ridge weights in `z` order: λ on x and μ, the jump weights on y.
fn block_weights(model: &ModelSpec, config: &SolverConfig) -> Vec<f64> {
    let m = model.state_dim();
    let mut w = vec![config.ridge_lambda; 2 * m];
    let extra = config.extra_penalty_weight.unwrap_or(model.extra_penalty_weight());
    for v in 0..model.jump_dim() {
        let mut wv = 0.0;
        if config.penalize_jump_derivatives {
            wv += config.ridge_lambda;
        }
        if model.extra_penalty_vars().contains(&v) {
            wv += extra;
        }
        w.push(wv);
    }
    w
}

/// The collocation least-squares problem on one grid.
struct Collocation<'a> {
    model: &'a ModelSpec,
    layout: Layout,
    gram: DMatrix<f64>,
    integrals: DMatrix<f64>,
    /// `Lᵀ` with `L Lᵀ = K + jitter`.
    chol_t: DMatrix<f64>,
    weights: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> Collocation<'a> {
    fn new(model: &'a ModelSpec, grid: &TrainingGrid, kernel: &KernelSpec, config: &SolverConfig) -> Result<Self> {
        let layout = Layout::new(model, grid);
        let gram = gram_matrix(kernel, grid);
        let chol_t = gram.jittered_cholesky(kernel.variance())?.transpose();
        let integrals = integral_matrix(kernel, grid);
        let mut lower = vec![f64::NEG_INFINITY; layout.len()];
        let mut upper = vec![f64::INFINITY; layout.len()];
        let b = model.bounds();
        let (m, p) = (layout.m, layout.p);
        for k in 0..m {
            lower[layout.mu0() + k] = b.lower[m + k];
            upper[layout.mu0() + k] = b.upper[m + k];
        }
        for k in 0..p {
            lower[layout.y0() + k] = b.lower[2 * m + k];
            upper[layout.y0() + k] = b.upper[2 * m + k];
        }
        Ok(Self {
            model,
            layout,
            gram: gram.entries().clone(),
            integrals,
            chol_t,
            weights: block_weights(model, config),
            lower,
            upper,
        })
    }

    /// Levels `z_i` and derivatives `(ẋ_i, μ̇_i)` at every grid point.
    fn points(&self, params: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let Layout { n, m, p } = self.layout;
        let nv = self.layout.vars();
        let x0 = self.model.initial_state();
        let starts: Vec<f64> = x0
            .iter()
            .chain(&params[self.layout.mu0()..self.layout.mu0() + m])
            .chain(&params[self.layout.y0()..self.layout.y0() + p])
            .copied()
            .collect();
        let mut levels = vec![starts.clone(); n];
        let mut rates = vec![vec![0.0; 2 * m]; n];
        for v in 0..nv {
            let alpha = DVector::from_column_slice(&params[v * n..(v + 1) * n]);
            let lv = &self.integrals * &alpha;
            for i in 0..n {
                levels[i][v] += lv[i];
            }
            if v < 2 * m {
                let dv = &self.gram * &alpha;
                for i in 0..n {
                    rates[i][v] = dv[i];
                }
            }
        }
        (levels, rates)
    }

    fn dae_rows(&self, params: &[f64]) -> (DVector<f64>, Vec<Vec<f64>>) {
        let Layout { n, m, .. } = self.layout;
        let nv = self.layout.vars();
        let r = self.model.discount_rate();
        let (levels, rates) = self.points(params);
        let mut out = DVector::zeros(n * nv);
        for i in 0..n {
            let z = &levels[i];
            let eq = self.model.equations(&z[..m], &z[m..2 * m], &z[2 * m..]);
            let row = i * nv;
            for k in 0..m {
                out[row + k] = rates[i][k] - eq.f[k];
                out[row + m + k] = rates[i][m + k] - r * z[m + k] + eq.mu_g[k];
            }
            for (k, h) in eq.h.iter().enumerate() {
                out[row + 2 * m + k] = *h;
            }
        }
        (out, levels)
    }

    fn ridge_rows(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count() * self.layout.n
    }

    /// Jacobian of the DAE rows.
    fn dae_jacobian(&self, params: &[f64]) -> DMatrix<f64> {
        let Layout { n, m, .. } = self.layout;
        let nv = self.layout.vars();
        let r = self.model.discount_rate();
        let (levels, _) = self.points(params);
        let mut jac = DMatrix::zeros(n * nv, self.layout.len());
        for i in 0..n {
            let z = &levels[i];
            let sys = self.model.system().jacobian(&z[..m], &z[m..2 * m], &z[2 * m..]);
            // ∂(residual)/∂z at this point
            let mut local = sys;
            for k in 0..m {
                for c in 0..nv {
                    local[(k, c)] = -local[(k, c)];
                }
                local[(m + k, m + k)] -= r;
            }
            for k in 0..nv {
                let row = i * nv + k;
                for v in 0..nv {
                    let d = local[(k, v)];
                    let col = v * n;
                    if d != 0.0 {
                        for j in 0..n {
                            jac[(row, col + j)] = d * self.integrals[(i, j)];
                        }
                    }
                    if v == k && k < 2 * m {
                        for j in 0..n {
                            jac[(row, col + j)] += self.gram[(i, j)];
                        }
                    }
                }
                for c in 0..m {
                    jac[(row, self.layout.mu0() + c)] = local[(k, m + c)];
                }
                for c in 0..self.layout.p {
                    jac[(row, self.layout.y0() + c)] = local[(k, 2 * m + c)];
                }
            }
        }
        jac
    }

    /// Sum of squared DAE residuals plus `Σ w αᵀKα` with the exact Gram matrix.
    fn objective(&self, params: &[f64]) -> (f64, DVector<f64>) {
        let (res, _) = self.dae_rows(params);
        let n = self.layout.n;
        let mut total = res.norm_squared();
        for (b, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                let alpha = DVector::from_column_slice(&params[b * n..(b + 1) * n]);
                total += w * alpha.dot(&(&self.gram * &alpha));
            }
        }
        (total, res)
    }

    fn gradient(&self, params: &[f64]) -> DVector<f64> {
        let (res, _) = self.dae_rows(params);
        let mut g = self.dae_jacobian(params).tr_mul(&res) * 2.0;
        let n = self.layout.n;
        for (b, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                let alpha = DVector::from_column_slice(&params[b * n..(b + 1) * n]);
                let ka = &self.gram * &alpha;
                for j in 0..n {
                    g[b * n + j] += 2.0 * w * ka[j];
                }
            }
        }
        g
    }

    fn first_non_finite(&self, params: &[f64]) -> Option<Error> {
        let (res, _) = self.dae_rows(params);
        let nv = self.layout.vars();
        res.iter()
            .position(|v| !v.is_finite())
            .map(|idx| Error::NonFiniteResidual {
                point: idx / nv,
                time: f64::NAN,
                equation: idx % nv,
            })
    }
}

impl LeastSquares for Collocation<'_> {
    fn n_params(&self) -> usize {
        self.layout.len()
    }

    fn residuals(&self, params: &[f64]) -> Option<DVector<f64>> {
        let (dae, _) = self.dae_rows(params);
        if dae.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let n = self.layout.n;
        let mut out = DVector::zeros(dae.len() + self.ridge_rows());
        out.rows_mut(0, dae.len()).copy_from(&dae);
        let mut row = dae.len();
        for (b, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                let alpha = DVector::from_column_slice(&params[b * n..(b + 1) * n]);
                let piece = &self.chol_t * alpha * w.sqrt();
                out.rows_mut(row, n).copy_from(&piece);
                row += n;
            }
        }
        Some(out)
    }

    fn jacobian(&self, params: &[f64]) -> DMatrix<f64> {
        let dae = self.dae_jacobian(params);
        let n = self.layout.n;
        let mut jac = DMatrix::zeros(dae.nrows() + self.ridge_rows(), self.layout.len());
        jac.rows_mut(0, dae.nrows()).copy_from(&dae);
        let mut row = dae.nrows();
        for (b, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                jac.view_mut((row, b * n), (n, n)).copy_from(&(&self.chol_t * w.sqrt()));
                row += n;
            }
        }
        jac
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }
}

/// Penalised objective and stacked DAE residuals (length `N·(2M+P)`, row
/// `i·(2M+P) + k` for equation `k` at grid point `i`).
pub fn assemble_objective(
    model: &ModelSpec,
    grid: &TrainingGrid,
    kernel: &KernelSpec,
    config: &SolverConfig,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let problem = Collocation::new(model, grid, kernel, config)?;
    problem.layout.check(params)?;
    let (objective, res) = problem.objective(params);
    if let Some(Error::NonFiniteResidual { point, equation, .. }) = problem.first_non_finite(params) {
        return Err(Error::NonFiniteResidual {
            point,
            time: grid.points()[point],
            equation,
        });
    }
    Ok((objective, res.iter().copied().collect()))
}

/// Analytic gradient of [`assemble_objective`]'s objective.
pub fn objective_gradient(
    model: &ModelSpec,
    grid: &TrainingGrid,
    kernel: &KernelSpec,
    config: &SolverConfig,
    params: &[f64],
) -> Result<Vec<f64>> {
    let problem = Collocation::new(model, grid, kernel, config)?;
    problem.layout.check(params)?;
    Ok(problem.gradient(params).iter().copied().collect())
}

/// Default starting point: zero (or small random) coefficients, `μ̂₀ = 1`
/// unless overridden, `ŷ₀` solving `H(x₀, μ̂₀, y) = 0`.
pub fn initial_parameters(model: &ModelSpec, grid: &TrainingGrid, config: &SolverConfig) -> Result<Vec<f64>> {
    let layout = Layout::new(model, grid);
    let (m, p) = (layout.m, layout.p);
    let mut params = vec![0.0; layout.len()];
    if config.initial_coefficient_scale > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        for v in params[..layout.mu0()].iter_mut() {
            *v = config.initial_coefficient_scale * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    let bounds = model.bounds();
    let mu0 = match &config.initial_mu0 {
        Some(v) if v.len() != m => {
            return Err(Error::DimensionMismatch {
                context: "initial_mu0",
                expected: m,
                got: v.len(),
            })
        }
        Some(v) => v.clone(),
        None => vec![1.0; m],
    };
    let mu0: Vec<f64> = mu0.iter().enumerate().map(|(k, &v)| bounds.clamp(m + k, v)).collect();
    let y0 = match &config.initial_y0 {
        Some(v) if v.len() != p => {
            return Err(Error::DimensionMismatch {
                context: "initial_y0",
                expected: p,
                got: v.len(),
            })
        }
        Some(v) => v.clone(),
        None => {
            let guess: Vec<f64> = (0..p).map(|k| bounds.clamp(2 * m + k, 1.0)).collect();
            solve_jump(model, model.initial_state(), &mu0, &guess, 1e-12).unwrap_or(guess)
        }
    };
    params[layout.mu0()..layout.mu0() + m].copy_from_slice(&mu0);
    for (k, v) in y0.into_iter().enumerate() {
        params[layout.y0() + k] = bounds.clamp(2 * m + k, v);
    }
    Ok(params)
}

/// Fits the model on `grid`. The result is deterministic in its inputs.
pub fn solve(
    model: &ModelSpec,
    grid: &TrainingGrid,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<KernelSolution> {
    config.validate()?;
    if config.ridge_lambda == 0.0 {
        return Err(Error::Configuration(
            "ridge_lambda = 0 leaves the Gauss-Newton system singular on an underdetermined grid; use a small positive value"
                .into(),
        ));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "solve needs at least 2 grid points, got {}",
            grid.len()
        )));
    }
    let problem = Collocation::new(model, grid, kernel, config)?;
    let start = initial_parameters(model, grid, config)?;
    if problem.residuals(&start).is_none() {
        let err = problem.first_non_finite(&start).unwrap_or(Error::BoundViolation(
            "initial parameters lie outside the model bounds".into(),
        ));
        return Err(match err {
            Error::NonFiniteResidual { point, equation, .. } => Error::NonFiniteResidual {
                point,
                time: grid.points()[point],
                equation,
            },
            other => other,
        });
    }
    let options = LmOptions {
        max_iterations: config.max_iterations,
        step_tolerance: config.step_tolerance,
        ..LmOptions::default()
    };
    let n_rows = (grid.len() * problem.layout.vars()) as f64;
    let msr = |p: &[f64]| problem.dae_rows(p).0.norm_squared() / n_rows;

    let mut best = lm::minimize(&problem, &start, &options).expect("start point is finite");
    log::debug!(
        "LM finished after {} iterations ({:?}), cost {:e}",
        best.iterations,
        best.termination,
        best.cost
    );
    if msr(&best.params) > config.residual_tolerance
        || matches!(best.termination, Termination::Stalled | Termination::MaxIterations)
    {
        if let Some(fallback) = lm::minimize_bfgs(&problem, &best.params, &options) {
            log::debug!(
                "BFGS fallback finished after {} iterations ({:?}), cost {:e}",
                fallback.iterations,
                fallback.termination,
                fallback.cost
            );
            if fallback.cost < best.cost {
                let iterations = best.iterations + fallback.iterations;
                best = fallback;
                best.iterations = iterations;
            }
        }
    }

    let mut sol = KernelSolution::from_parameters(model, grid, kernel, &best.params)?;
    let (objective, res) = problem.objective(&best.params);
    let mean_squared_residual = res.norm_squared() / n_rows;
    let converged = mean_squared_residual <= config.residual_tolerance;
    sol.fit_report = FitReport {
        iterations: best.iterations,
        objective,
        mean_squared_residual,
        max_abs_residual: res.amax(),
        termination: best.termination,
        used_fallback: best.used_fallback,
        converged,
    };

    let (_, levels) = problem.dae_rows(&best.params);
    let bounds = model.bounds();
    for (i, z) in levels.iter().enumerate() {
        if let Some(v) = (0..z.len()).find(|&v| !bounds.contains(v, z[v])) {
            return Err(Error::BoundViolation(format!(
                "variable {} = {} at t = {} leaves [{}, {}]",
                model.variable_names()[v],
                z[v],
                grid.points()[i],
                bounds.lower[v],
                bounds.upper[v]
            )));
        }
    }
    if converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence(Box::new(sol)))
    }
}
