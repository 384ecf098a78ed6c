use std::sync::Arc;

use nalgebra::DMatrix;

use super::{require, DaeSystem, Equations, ModelSpec};
use crate::error::Result;

/// Dividend `ẋ = c + gx`, price `μ̇ = rμ − x`, written with `G = x/μ`.
#[derive(Clone, Debug)]
pub struct AssetPricing {
    pub c: f64,
    pub g: f64,
}

impl DaeSystem for AssetPricing {
    fn state_dim(&self) -> usize {
        1
    }

    fn jump_dim(&self) -> usize {
        0
    }

    fn equations(&self, x: &[f64], mu: &[f64], _y: &[f64]) -> Equations {
        let (x, mu) = (x[0], mu[0]);
        // μ⊙G cancels to x exactly; μ = 0 still signals the singular G.
        let (g, mu_g) = if mu == 0.0 { (f64::NAN, f64::NAN) } else { (x / mu, x) };
        Equations {
            f: vec![self.c + self.g * x],
            g: vec![g],
            mu_g: vec![mu_g],
            h: Vec::new(),
        }
    }

    fn jacobian(&self, _x: &[f64], _mu: &[f64], _y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.g, 0.0, 1.0, 0.0])
    }

    fn state_names(&self) -> Vec<String> {
        vec!["x".into()]
    }

    fn jump_names(&self) -> Vec<String> {
        Vec::new()
    }
}

pub fn make_asset_pricing(x0: f64, c: f64, g: f64, r: f64) -> Result<ModelSpec> {
    require(x0.is_finite() && c.is_finite() && g.is_finite(), || {
        "asset pricing parameters must be finite".to_string()
    })?;
    require(r > 0.0 && r.is_finite(), || format!("r must be positive, got {r}"))?;
    require(r != g, || format!("r must differ from g (both {r})"))?;
    ModelSpec::new("asset-pricing", Arc::new(AssetPricing { c, g }), r, vec![x0])
}
