use std::sync::Arc;

use nalgebra::DMatrix;

use super::{require, Bounds, DaeSystem, Equations, ModelSpec};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HumanCapitalParams {
    pub x_k0: f64,
    pub x_h0: f64,
    pub delta_k: f64,
    pub delta_h: f64,
    pub a_k: f64,
    pub a_h: f64,
    pub r: f64,
    pub lambda_p: f64,
}

impl Default for HumanCapitalParams {
    fn default() -> Self {
        Self {
            x_k0: 1.5,
            x_h0: 1.37,
            delta_k: 0.1,
            delta_h: 0.05,
            a_k: 1.0 / 3.0,
            a_h: 0.25,
            r: 0.11,
            lambda_p: 5e-3,
        }
    }
}

/// Two capital stocks with `f = x_k^{a_k} x_h^{a_h}`.
/// Variables: `x = (x_k, x_h)`, `μ = (μ_k, μ_h)`, `y = (y_c, y_k, y_h)`.
#[derive(Clone, Debug)]
pub struct HumanCapital {
    pub delta_k: f64,
    pub delta_h: f64,
    pub a_k: f64,
    pub a_h: f64,
}

impl HumanCapital {
    pub fn output(&self, xk: f64, xh: f64) -> f64 {
        if xk <= 0.0 || xh <= 0.0 {
            return f64::NAN;
        }
        xk.powf(self.a_k) * xh.powf(self.a_h)
    }

    /// `(∂f/∂x_k, ∂f/∂x_h)`.
    pub fn marginals(&self, xk: f64, xh: f64) -> (f64, f64) {
        let f = self.output(xk, xh);
        (self.a_k * f / xk, self.a_h * f / xh)
    }
}

impl DaeSystem for HumanCapital {
    fn state_dim(&self) -> usize {
        2
    }

    fn jump_dim(&self) -> usize {
        3
    }

    fn equations(&self, x: &[f64], mu: &[f64], y: &[f64]) -> Equations {
        let (xk, xh) = (x[0], x[1]);
        let (yc, yk, yh) = (y[0], y[1], y[2]);
        let f = self.output(xk, xh);
        let (fk, fh) = self.marginals(xk, xh);
        let g = vec![fk - self.delta_k, fh - self.delta_h];
        Equations {
            f: vec![yk - self.delta_k * xk, yh - self.delta_h * xh],
            mu_g: vec![mu[0] * g[0], mu[1] * g[1]],
            g,
            h: vec![mu[0] * yc - 1.0, mu[0] - mu[1], f - yc - yk - yh],
        }
    }

    fn jacobian(&self, x: &[f64], mu: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (xk, xh) = (x[0], x[1]);
        let (ak, ah) = (self.a_k, self.a_h);
        let f = self.output(xk, xh);
        let (fk, fh) = self.marginals(xk, xh);
        let fkk = ak * (ak - 1.0) * f / (xk * xk);
        let fhh = ah * (ah - 1.0) * f / (xh * xh);
        let fkh = ak * ah * f / (xk * xh);
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(7, 7, &[
            // xk           xh            μk                 μh                 yc     yk    yh
            -self.delta_k,  0.0,          0.0,               0.0,               0.0,   1.0,  0.0,
            0.0,            -self.delta_h, 0.0,              0.0,               0.0,   0.0,  1.0,
            mu[0] * fkk,    mu[0] * fkh,  fk - self.delta_k, 0.0,               0.0,   0.0,  0.0,
            mu[1] * fkh,    mu[1] * fhh,  0.0,               fh - self.delta_h, 0.0,   0.0,  0.0,
            0.0,            0.0,          y[0],              0.0,               mu[0], 0.0,  0.0,
            0.0,            0.0,          1.0,               -1.0,              0.0,   0.0,  0.0,
            fk,             fh,           0.0,               0.0,               -1.0,  -1.0, -1.0,
        ]);
        j
    }

    fn state_names(&self) -> Vec<String> {
        vec!["x_k".into(), "x_h".into()]
    }

    fn jump_names(&self) -> Vec<String> {
        vec!["y_c".into(), "y_k".into(), "y_h".into()]
    }
}

pub fn make_human_capital(params: HumanCapitalParams) -> Result<ModelSpec> {
    let HumanCapitalParams {
        x_k0,
        x_h0,
        delta_k,
        delta_h,
        a_k,
        a_h,
        r,
        lambda_p,
    } = params;
    require(a_k > 0.0 && a_h > 0.0 && a_k + a_h < 1.0, || {
        format!("need a_k, a_h > 0 with a_k + a_h < 1, got {a_k} and {a_h}")
    })?;
    require(delta_k > 0.0 && delta_k < 1.0, || {
        format!("delta_k must lie in (0, 1), got {delta_k}")
    })?;
    require(delta_h > 0.0 && delta_h < 1.0, || {
        format!("delta_h must lie in (0, 1), got {delta_h}")
    })?;
    require(x_k0 > 0.0 && x_h0 > 0.0, || {
        format!("initial capital stocks must be positive, got {x_k0}, {x_h0}")
    })?;
    let system = HumanCapital {
        delta_k,
        delta_h,
        a_k,
        a_h,
    };
    let mut lower = vec![1e-8; 4];
    lower.extend([1e-8, f64::NEG_INFINITY, f64::NEG_INFINITY]);
    let bounds = Bounds {
        lower,
        upper: vec![f64::INFINITY; 7],
    };
    ModelSpec::new("human-capital", Arc::new(system), r, vec![x_k0, x_h0])?
        .with_bounds(bounds)?
        .with_extra_penalty(vec![0, 1, 2], lambda_p)
}
