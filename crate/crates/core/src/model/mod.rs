//! Semi-explicit DAE models of the form
//!
//! ```text
//! ẋ = F(x, μ, y)
//! μ̇ = rμ − μ ⊙ G(x, μ, y)
//! 0 = H(x, μ, y)
//! ```
//!
//! with `x(0) = x₀` given and the transversality limit `e^{-rt} x ⊙ μ → 0`
//! left to the solver's norm selection.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

mod advertising;
mod asset;
mod growth;
mod human_capital;

pub use advertising::{make_optimal_advertising, Advertising};
pub use asset::{make_asset_pricing, AssetPricing};
pub use growth::{make_neoclassical_growth, make_skiba_growth, Growth, Technology};
pub use human_capital::{make_human_capital, HumanCapital, HumanCapitalParams};

/// Right-hand sides at one point. `mu_g` is `μ ⊙ G`, which models may
/// compute in a cancelled form (see [`AssetPricing`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Equations {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub mu_g: Vec<f64>,
    pub h: Vec<f64>,
}

/// One DAE instance. Variables are ordered `z = (x, μ, y)` everywhere.
pub trait DaeSystem: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;

    fn jump_dim(&self) -> usize;

    fn equations(&self, x: &[f64], mu: &[f64], y: &[f64]) -> Equations;

    /// Square Jacobian of the stacked map `(F, μ⊙G, H)` with respect to `z`.
    fn jacobian(&self, x: &[f64], mu: &[f64], y: &[f64]) -> DMatrix<f64>;

    fn state_names(&self) -> Vec<String>;

    fn jump_names(&self) -> Vec<String>;

    /// Instantaneous payoff `u(x, y)` when the model has one; used to rank
    /// competing candidate paths.
    fn flow_payoff(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }

    /// State value where the technology switches branch, if any.
    fn kink(&self) -> Option<f64> {
        None
    }
}

/// Closed box `lower ≤ z ≤ upper` on `z = (x, μ, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn contains(&self, index: usize, value: f64) -> bool {
        value >= self.lower[index] && value <= self.upper[index]
    }

    pub fn clamp(&self, index: usize, value: f64) -> f64 {
        value.clamp(self.lower[index], self.upper[index])
    }
}

/// A DAE together with its data: discount rate, initial state, bounds and
/// the optional extra penalty on jump-variable derivatives.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    system: Arc<dyn DaeSystem>,
    discount_rate: f64,
    initial_state: Vec<f64>,
    bounds: Bounds,
    extra_penalty_vars: Vec<usize>,
    extra_penalty_weight: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("discount_rate", &self.discount_rate)
            .field("initial_state", &self.initial_state)
            .field("system", &self.system)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        system: Arc<dyn DaeSystem>,
        discount_rate: f64,
        initial_state: Vec<f64>,
    ) -> Result<Self> {
        if !(discount_rate.is_finite() && discount_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "discount rate must be positive, got {discount_rate}"
            )));
        }
        let m = system.state_dim();
        if m == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        if initial_state.len() != m {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: m,
                got: initial_state.len(),
            });
        }
        let n = 2 * m + system.jump_dim();
        Ok(Self {
            name: name.into(),
            system,
            discount_rate,
            initial_state,
            bounds: Bounds::unbounded(n),
            extra_penalty_vars: Vec::new(),
            extra_penalty_weight: 0.0,
        })
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Result<Self> {
        let n = self.n_vars();
        for (context, len) in [
            ("lower bounds", bounds.lower.len()),
            ("upper bounds", bounds.upper.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    got: len,
                });
            }
        }
        if let Some(i) = (0..n).find(|&i| !(bounds.lower[i] < bounds.upper[i])) {
            return Err(Error::InvalidParameter(format!(
                "bounds on variable {i} are empty: [{}, {}]",
                bounds.lower[i], bounds.upper[i]
            )));
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Jump variables (by index into y) whose derivative norms are penalised
    /// with weight `weight`.
    pub fn with_extra_penalty(mut self, vars: Vec<usize>, weight: f64) -> Result<Self> {
        let p = self.jump_dim();
        if let Some(&v) = vars.iter().find(|&&v| v >= p) {
            return Err(Error::InvalidParameter(format!(
                "extra penalty variable index {v} out of range for {p} jump variables"
            )));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "extra penalty weight must be non-negative, got {weight}"
            )));
        }
        self.extra_penalty_vars = vars;
        self.extra_penalty_weight = weight;
        Ok(self)
    }

    pub fn with_initial_state(&self, initial_state: Vec<f64>) -> Result<Self> {
        let m = self.state_dim();
        if initial_state.len() != m {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: m,
                got: initial_state.len(),
            });
        }
        if let Some(i) = (0..m).find(|&i| !self.bounds.contains(i, initial_state[i])) {
            return Err(Error::InvalidParameter(format!(
                "initial state component {i} = {} is outside the model bounds",
                initial_state[i]
            )));
        }
        let mut out = self.clone();
        out.initial_state = initial_state;
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn system(&self) -> &dyn DaeSystem {
        self.system.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn jump_dim(&self) -> usize {
        self.system.jump_dim()
    }

    /// `2M + P`.
    pub fn n_vars(&self) -> usize {
        2 * self.state_dim() + self.jump_dim()
    }

    pub fn discount_rate(&self) -> f64 {
        self.discount_rate
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn extra_penalty_vars(&self) -> &[usize] {
        &self.extra_penalty_vars
    }

    pub fn extra_penalty_weight(&self) -> f64 {
        self.extra_penalty_weight
    }

    /// Names of x, μ and y components, in `z` order.
    pub fn variable_names(&self) -> Vec<String> {
        let states = self.system.state_names();
        let mut names = states.clone();
        names.extend(states.iter().map(|s| format!("mu_{s}")));
        names.extend(self.system.jump_names());
        names
    }

    pub fn equations(&self, x: &[f64], mu: &[f64], y: &[f64]) -> Equations {
        self.system.equations(x, mu, y)
    }

    /// Stacked steady-state map `[F; rμ − μ⊙G; H]` (all derivatives zero).
    pub fn steady_residual(&self, z: &[f64]) -> Vec<f64> {
        let (x, mu, y) = self.split(z);
        let eq = self.system.equations(x, mu, y);
        let r = self.discount_rate;
        let mut out = eq.f;
        out.extend(mu.iter().zip(&eq.mu_g).map(|(m, mg)| r * m - mg));
        out.extend(eq.h);
        out
    }

    /// Jacobian of [`Self::steady_residual`].
    pub fn steady_jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let (x, mu, y) = self.split(z);
        let m = self.state_dim();
        let mut j = self.system.jacobian(x, mu, y);
        for row in m..2 * m {
            for col in 0..j.ncols() {
                j[(row, col)] = -j[(row, col)];
            }
            j[(row, row)] += self.discount_rate;
        }
        j
    }

    /// Splits `z` into `(x, μ, y)`.
    pub fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let m = self.state_dim();
        (&z[..m], &z[m..2 * m], &z[2 * m..])
    }
}

/// Sampled path of all variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub xdot: Option<Vec<Vec<f64>>>,
    pub mudot: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        for (context, len) in [
            ("trajectory x path", self.x.len()),
            ("trajectory mu path", self.mu.len()),
            ("trajectory y path", self.y.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    got: len,
                });
            }
        }
        for (context, path) in [
            ("trajectory xdot path", &self.xdot),
            ("trajectory mudot path", &self.mudot),
        ] {
            if let Some(p) = path {
                if p.len() != n {
                    return Err(Error::DimensionMismatch {
                        context,
                        expected: n,
                        got: p.len(),
                    });
                }
            }
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("trajectory times must be increasing".into()));
        }
        Ok(())
    }

    /// Index of the last sample with `times[i] <= t`.
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        match self.times.partition_point(|&s| s <= t) {
            0 => None,
            k => Some(k - 1),
        }
    }
}

/// `[ẋ − F; μ̇ − rμ + μ⊙G; H]`.
pub fn dae_residual(
    model: &ModelSpec,
    x: &[f64],
    mu: &[f64],
    y: &[f64],
    xdot: &[f64],
    mudot: &[f64],
) -> Result<Vec<f64>> {
    let m = model.state_dim();
    let p = model.jump_dim();
    for (context, expected, got) in [
        ("dae_residual x", m, x.len()),
        ("dae_residual mu", m, mu.len()),
        ("dae_residual y", p, y.len()),
        ("dae_residual xdot", m, xdot.len()),
        ("dae_residual mudot", m, mudot.len()),
    ] {
        if expected != got {
            return Err(Error::DimensionMismatch { context, expected, got });
        }
    }
    let eq = model.equations(x, mu, y);
    let r = model.discount_rate();
    let mut out = Vec::with_capacity(2 * m + p);
    out.extend(xdot.iter().zip(&eq.f).map(|(d, f)| d - f));
    out.extend((0..m).map(|k| mudot[k] - r * mu[k] + eq.mu_g[k]));
    out.extend(eq.h);
    Ok(out)
}

/// Solves `H(x, μ, y) = 0` for `y` from `guess`: Newton with backtracking,
/// switching to damped least squares when `∂H/∂y` is singular.
pub fn solve_jump(model: &ModelSpec, x: &[f64], mu: &[f64], guess: &[f64], tol: f64) -> Result<Vec<f64>> {
    let m = model.state_dim();
    let p = model.jump_dim();
    if p == 0 {
        return Ok(Vec::new());
    }
    let h_of = |y: &[f64]| DVector::from_vec(model.equations(x, mu, y).h);
    let norm = |h: &DVector<f64>| {
        if h.iter().all(|v| v.is_finite()) {
            h.amax()
        } else {
            f64::INFINITY
        }
    };
    let mut y = guess.to_vec();
    let mut h = h_of(&y);
    let mut current = norm(&h);
    for _ in 0..100 {
        if current <= tol {
            return Ok(y);
        }
        let jac = model.system().jacobian(x, mu, &y);
        let hy = jac.view((2 * m, 2 * m), (p, p)).into_owned();
        let step = match hy.clone().lu().solve(&h) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                // Levenberg step for a rank-deficient ∂H/∂y.
                let a = hy.tr_mul(&hy) + DMatrix::identity(p, p) * 1e-10;
                match a.cholesky() {
                    Some(c) => c.solve(&hy.tr_mul(&h)),
                    None => break,
                }
            }
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-10 {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let ht = h_of(&trial);
            let nt = norm(&ht);
            if nt < current {
                y = trial;
                h = ht;
                current = nt;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if current <= tol {
        Ok(y)
    } else {
        Err(Error::NewtonFailure {
            time: f64::NAN,
            residual: current,
        })
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

/// Finite-difference Jacobian of the stacked `(F, μ⊙G, H)` map; a
/// cross-check for the analytic versions.
pub fn numerical_jacobian(system: &dyn DaeSystem, z: &[f64], step: f64) -> DMatrix<f64> {
    let m = system.state_dim();
    let n = z.len();
    let eval = |z: &[f64]| {
        let eq = system.equations(&z[..m], &z[m..2 * m], &z[2 * m..]);
        let mut v = eq.f;
        v.extend(eq.mu_g);
        v.extend(eq.h);
        v
    };
    let mut jac = DMatrix::zeros(n, n);
    let mut zp = z.to_vec();
    for col in 0..n {
        let h = step * (1.0 + z[col].abs());
        zp[col] = z[col] + h;
        let up = eval(&zp);
        zp[col] = z[col] - h;
        let down = eval(&zp);
        zp[col] = z[col];
        for row in 0..n {
            jac[(row, col)] = (up[row] - down[row]) / (2.0 * h);
        }
    }
    jac
}
