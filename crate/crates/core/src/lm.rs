//! Box-constrained nonlinear least squares.
//!
//! Levenberg–Marquardt with Nielsen's damping update and projection onto
//! the box; a projected BFGS on `½‖r‖²` serves as fallback when LM stalls.

use nalgebra::{DMatrix, DVector};

/// A least-squares problem `min ½‖r(p)‖²` subject to `lower ≤ p ≤ upper`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;

    /// `None` when the residual is non-finite or the point is infeasible.
    fn residuals(&self, params: &[f64]) -> Option<DVector<f64>>;

    fn jacobian(&self, params: &[f64]) -> DMatrix<f64>;

    fn lower(&self) -> &[f64];

    fn upper(&self) -> &[f64];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when `‖Jᵀr‖∞ ≤ gradient_tolerance`.
    pub gradient_tolerance: f64,
    /// Stop when `‖Δp‖ ≤ step_tolerance·(‖p‖ + step_tolerance)`.
    pub step_tolerance: f64,
    /// Stop when an accepted step reduces the cost by less than this fraction.
    pub cost_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-14,
            step_tolerance: 1e-13,
            cost_tolerance: 1e-15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    Cost,
    MaxIterations,
    /// Damping grew without producing an acceptable step.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `½‖r‖²` at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub used_fallback: bool,
}

const MAX_DAMPING: f64 = 1e32;

fn project(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in p.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Gradient components that point into an active bound are zeroed.
fn projected_gradient(p: &[f64], g: &DVector<f64>, lower: &[f64], upper: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        g.len(),
        (0..g.len()).map(|i| {
            let at_lower = p[i] <= lower[i] && g[i] > 0.0;
            let at_upper = p[i] >= upper[i] && g[i] < 0.0;
            if at_lower || at_upper {
                0.0
            } else {
                g[i]
            }
        }),
    )
}

/// Runs LM from `start` (projected into the box first). `start` must give
/// finite residuals.
pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, start: &[f64], options: &LmOptions) -> Option<LmOutcome> {
    let (lower, upper) = (problem.lower(), problem.upper());
    let mut p = start.to_vec();
    project(&mut p, lower, upper);
    let mut r = problem.residuals(&p)?;
    let mut cost = 0.5 * r.norm_squared();
    let n = p.len();

    let mut jac = problem.jacobian(&p);
    let mut a = jac.tr_mul(&jac);
    let mut g = jac.tr_mul(&r);
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let mut damping = 1e-3 * max_diag.max(f64::MIN_POSITIVE);
    let mut growth = 2.0;

    let mut iterations = 0;
    let termination = loop {
        if projected_gradient(&p, &g, lower, upper).amax() <= options.gradient_tolerance {
            break Termination::Gradient;
        }
        if iterations >= options.max_iterations {
            break Termination::MaxIterations;
        }
        if damping > MAX_DAMPING {
            break Termination::Stalled;
        }
        iterations += 1;

        // variables held at a bound by the gradient stay fixed this step
        let held: Vec<bool> = (0..n)
            .map(|i| (p[i] <= lower[i] && g[i] > 0.0) || (p[i] >= upper[i] && g[i] < 0.0))
            .collect();
        let mut system = a.clone();
        let mut rhs = -&g;
        for i in 0..n {
            system[(i, i)] += damping;
            if held[i] {
                system.row_mut(i).fill(0.0);
                system.column_mut(i).fill(0.0);
                system[(i, i)] = 1.0;
                rhs[i] = 0.0;
            }
        }
        let Some(chol) = system.cholesky() else {
            damping *= growth;
            growth *= 2.0;
            continue;
        };
        let step = chol.solve(&rhs);
        let mut candidate: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        project(&mut candidate, lower, upper);
        let taken = DVector::from_iterator(n, candidate.iter().zip(&p).map(|(c, o)| c - o));
        let p_norm = DVector::from_column_slice(&p).norm();
        if taken.norm() <= options.step_tolerance * (p_norm + options.step_tolerance) {
            break Termination::Step;
        }

        let Some(r_new) = problem.residuals(&candidate) else {
            damping *= growth;
            growth *= 2.0;
            continue;
        };
        let cost_new = 0.5 * r_new.norm_squared();
        // model decrease for the projected step
        let predicted = -(g.dot(&taken) + 0.5 * taken.dot(&(&a * &taken)));
        let actual = cost - cost_new;
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };

        if rho > 0.0 && cost_new.is_finite() {
            p = candidate;
            r = r_new;
            let old_cost = cost;
            cost = cost_new;
            jac = problem.jacobian(&p);
            a = jac.tr_mul(&jac);
            g = jac.tr_mul(&r);
            damping *= f64::max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0).powi(3));
            growth = 2.0;
            if actual <= options.cost_tolerance * old_cost {
                break Termination::Cost;
            }
        } else {
            damping *= growth;
            growth *= 2.0;
        }
    };

    Some(LmOutcome {
        params: p,
        cost,
        iterations,
        termination,
        used_fallback: false,
    })
}

/// Projected BFGS with Armijo backtracking on `½‖r‖²`.
pub fn minimize_bfgs<P: LeastSquares + ?Sized>(problem: &P, start: &[f64], options: &LmOptions) -> Option<LmOutcome> {
    let (lower, upper) = (problem.lower(), problem.upper());
    let n = problem.n_params();
    let mut p = start.to_vec();
    project(&mut p, lower, upper);
    let mut r = problem.residuals(&p)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut g = problem.jacobian(&p).tr_mul(&r);
    let mut inv_h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;

    let termination = loop {
        if projected_gradient(&p, &g, lower, upper).amax() <= options.gradient_tolerance {
            break Termination::Gradient;
        }
        if iterations >= options.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let mut direction = -(&inv_h * &g);
        if direction.dot(&g) >= 0.0 {
            inv_h.fill_with_identity();
            direction = -g.clone();
        }
        let mut t = 1.0;
        let accepted = loop {
            let mut candidate: Vec<f64> = p.iter().zip(direction.iter()).map(|(a, d)| a + t * d).collect();
            project(&mut candidate, lower, upper);
            let taken = DVector::from_iterator(n, candidate.iter().zip(&p).map(|(c, o)| c - o));
            if let Some(rc) = problem.residuals(&candidate) {
                let cc = 0.5 * rc.norm_squared();
                if cc <= cost + 1e-4 * g.dot(&taken) {
                    break Some((candidate, rc, cc, taken));
                }
            }
            t *= 0.5;
            if t < 1e-20 {
                break None;
            }
        };
        let Some((candidate, rc, cc, s)) = accepted else {
            break Termination::Stalled;
        };
        let p_norm = DVector::from_column_slice(&p).norm();
        let small_step = s.norm() <= options.step_tolerance * (p_norm + options.step_tolerance);
        let old_cost = cost;
        p = candidate;
        r = rc;
        cost = cc;
        let g_new = problem.jacobian(&p).tr_mul(&r);
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &inv_h * &yv;
            let yhy = yv.dot(&hy);
            // H ← H − ρ(s hyᵀ + hy sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            inv_h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            inv_h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        g = g_new;
        if small_step {
            break Termination::Step;
        }
        if old_cost - cost <= options.cost_tolerance * old_cost {
            break Termination::Cost;
        }
    };

    Some(LmOutcome {
        params: p,
        cost,
        iterations,
        termination,
        used_fallback: true,
    })
}
