use thiserror::Error;

use crate::solver::KernelSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite residual at grid point {point} (t = {time}), equation {equation}")]
    NonFiniteResidual { point: usize, time: f64, equation: usize },

    #[error(
        "solver did not reach the residual tolerance after {} iterations (mean squared residual {:e})",
        .0.fit_report.iterations,
        .0.fit_report.mean_squared_residual
    )]
    NonConvergence(Box<KernelSolution>),

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("Newton iteration on the algebraic equations failed at t = {time} (residual {residual:e})")]
    NewtonFailure { time: f64, residual: f64 },

    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("shooting diverged: {0}")]
    ShootingDiverged(String),

    #[error("no sign change found for bisection on [{lower}, {upper}]")]
    NoBracket { lower: f64, upper: f64 },

    #[error("zero reference value for variable {variable} at t = {time}")]
    ZeroDenominator { variable: String, time: f64 },
}
