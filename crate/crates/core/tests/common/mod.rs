#![allow(dead_code)]

use ridgeless::model::{make_neoclassical_growth, ModelSpec, Trajectory};
use ridgeless::reference::{linspace, shooting_solve};

/// Saddle-path initial co-state of the baseline growth model, from an
/// independent high-precision shooting run.
pub const GROWTH_MU0: f64 = 1.4422045290096346;
pub const GROWTH_X_SS: f64 = 1.99981202650384776304;
pub const GROWTH_Y_SS: f64 = 1.05990037404703931441;

pub fn growth() -> ModelSpec {
    make_neoclassical_growth(1.0, 0.1, 0.11, 1.0 / 3.0).unwrap()
}

/// Shooting benchmark sampled at 401 points on [0, 40].
pub fn growth_benchmark() -> Trajectory {
    let sh = shooting_solve(&growth(), 40.0, &[1.0], 1e-14).unwrap();
    sh.path.sample(&linspace(40.0, 400)).unwrap()
}
