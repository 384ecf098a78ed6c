use std::sync::Arc;

use nalgebra::DMatrix;

use super::{require, Bounds, DaeSystem, Equations, ModelSpec};
use crate::error::Result;

/// Market share `x`, advertising spend `y`:
/// `ẋ = (1−x)y − βx`, `μ̇ = rμ − γ + βμ + μy`, `0 = y^{(1−κ)/κ} − κμ(1−x)`
/// with `γ = (β + r)/c`.
#[derive(Clone, Debug)]
pub struct Advertising {
    pub beta: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl Advertising {
    fn exponent(&self) -> f64 {
        (1.0 - self.kappa) / self.kappa
    }
}

impl DaeSystem for Advertising {
    fn state_dim(&self) -> usize {
        1
    }

    fn jump_dim(&self) -> usize {
        1
    }

    fn equations(&self, x: &[f64], mu: &[f64], y: &[f64]) -> Equations {
        let (x, mu, y) = (x[0], mu[0], y[0]);
        let (g, mu_g) = if mu == 0.0 {
            (f64::NAN, f64::NAN)
        } else {
            (self.gamma / mu - self.beta - y, self.gamma - self.beta * mu - mu * y)
        };
        Equations {
            f: vec![(1.0 - x) * y - self.beta * x],
            g: vec![g],
            mu_g: vec![mu_g],
            h: vec![y.powf(self.exponent()) - self.kappa * mu * (1.0 - x)],
        }
    }

    fn jacobian(&self, x: &[f64], mu: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (x, mu, y) = (x[0], mu[0], y[0]);
        let p = self.exponent();
        DMatrix::from_row_slice(
            3,
            3,
            &[
                -y - self.beta,
                0.0,
                1.0 - x, //
                0.0,
                -self.beta - y,
                -mu, //
                self.kappa * mu,
                -self.kappa * (1.0 - x),
                p * y.powf(p - 1.0),
            ],
        )
    }

    fn state_names(&self) -> Vec<String> {
        vec!["x".into()]
    }

    fn jump_names(&self) -> Vec<String> {
        vec!["y".into()]
    }
}

pub fn make_optimal_advertising(x0: f64, r: f64, c: f64, beta: f64, kappa: f64) -> Result<ModelSpec> {
    require((0.0..=1.0).contains(&x0), || format!("x0 must lie in [0, 1], got {x0}"))?;
    require(kappa > 0.0 && kappa < 1.0, || {
        format!("kappa must lie in (0, 1), got {kappa}")
    })?;
    require(beta > 0.0 && beta.is_finite(), || {
        format!("beta must be positive, got {beta}")
    })?;
    require(r > 0.0 && r.is_finite(), || format!("r must be positive, got {r}"))?;
    require(c > 0.0 && c.is_finite(), || format!("c must be positive, got {c}"))?;
    let system = Advertising {
        beta,
        kappa,
        gamma: (beta + r) / c,
    };
    let bounds = Bounds {
        lower: vec![0.0, 1e-8, 0.0],
        upper: vec![1.0, f64::INFINITY, f64::INFINITY],
    };
    ModelSpec::new("optimal-advertising", Arc::new(system), r, vec![x0])?.with_bounds(bounds)
}
