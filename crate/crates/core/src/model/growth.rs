use std::sync::Arc;

use nalgebra::DMatrix;

use super::{require, Bounds, DaeSystem, Equations, ModelSpec};
use crate::error::Result;

/// Positivity floor used for capital, the co-state and consumption.
const FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Technology {
    /// `f(x) = xᵃ`
    CobbDouglas { a: f64 },
    /// `f(x) = A max(xᵃ, b₁xᵃ − b₂)`
    ConcaveConvex { a: f64, scale: f64, b1: f64, b2: f64 },
}

impl Technology {
    fn a(&self) -> f64 {
        match *self {
            Self::CobbDouglas { a } | Self::ConcaveConvex { a, .. } => a,
        }
    }

    /// `(b₂/(b₁−1))^{1/a}`, where both branches agree.
    pub fn kink(&self) -> Option<f64> {
        match *self {
            Self::CobbDouglas { .. } => None,
            Self::ConcaveConvex { a, b1, b2, .. } => Some((b2 / (b1 - 1.0)).powf(1.0 / a)),
        }
    }

    /// `(multiplier on xᵃ, additive constant)` of the active branch.
    /// At the kink the lower branch is active.
    fn branch(&self, x: f64) -> (f64, f64) {
        match *self {
            Self::CobbDouglas { .. } => (1.0, 0.0),
            Self::ConcaveConvex { scale, b1, b2, .. } => {
                let upper = x > self.kink().expect("concave-convex has a kink");
                if upper {
                    (scale * b1, -scale * b2)
                } else {
                    (scale, 0.0)
                }
            }
        }
    }

    /// `f(x)`, NaN for non-positive capital.
    pub fn output(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NAN;
        }
        let xa = x.powf(self.a());
        match *self {
            Self::CobbDouglas { .. } => xa,
            Self::ConcaveConvex { scale, b1, b2, .. } => scale * xa.max(b1 * xa - b2),
        }
    }

    pub fn marginal(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NAN;
        }
        let a = self.a();
        self.branch(x).0 * a * x.powf(a - 1.0)
    }

    pub fn curvature(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NAN;
        }
        let a = self.a();
        self.branch(x).0 * a * (a - 1.0) * x.powf(a - 2.0)
    }
}

/// One-sector growth with log utility:
/// `F = f(x) − δx − y`, `G = f′(x) − δ`, `H = μy − 1`.
#[derive(Clone, Debug)]
pub struct Growth {
    pub technology: Technology,
    pub delta: f64,
}

impl DaeSystem for Growth {
    fn state_dim(&self) -> usize {
        1
    }

    fn jump_dim(&self) -> usize {
        1
    }

    fn equations(&self, x: &[f64], mu: &[f64], y: &[f64]) -> Equations {
        let (x, mu, y) = (x[0], mu[0], y[0]);
        let g = self.technology.marginal(x) - self.delta;
        Equations {
            f: vec![self.technology.output(x) - self.delta * x - y],
            g: vec![g],
            mu_g: vec![mu * g],
            h: vec![mu * y - 1.0],
        }
    }

    fn jacobian(&self, x: &[f64], mu: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (x, mu, y) = (x[0], mu[0], y[0]);
        let fp = self.technology.marginal(x);
        let fpp = self.technology.curvature(x);
        DMatrix::from_row_slice(
            3,
            3,
            &[
                fp - self.delta,
                0.0,
                -1.0, //
                mu * fpp,
                fp - self.delta,
                0.0, //
                0.0,
                y,
                mu,
            ],
        )
    }

    fn state_names(&self) -> Vec<String> {
        vec!["x".into()]
    }

    fn jump_names(&self) -> Vec<String> {
        vec!["y".into()]
    }

    fn flow_payoff(&self, _x: &[f64], y: &[f64]) -> Option<f64> {
        Some(y[0].ln())
    }

    fn kink(&self) -> Option<f64> {
        self.technology.kink()
    }
}

fn growth_spec(name: &str, technology: Technology, x0: f64, delta: f64, r: f64) -> Result<ModelSpec> {
    let bounds = Bounds {
        lower: vec![FLOOR; 3],
        upper: vec![f64::INFINITY; 3],
    };
    ModelSpec::new(name, Arc::new(Growth { technology, delta }), r, vec![x0])?.with_bounds(bounds)
}

fn check_common(x0: f64, delta: f64, r: f64, a: f64) -> Result<()> {
    require(x0 > 0.0 && x0.is_finite(), || format!("x0 must be positive, got {x0}"))?;
    require(delta > 0.0 && delta < 1.0, || {
        format!("delta must lie in (0, 1), got {delta}")
    })?;
    require(r > 0.0 && r.is_finite(), || format!("r must be positive, got {r}"))?;
    require(a > 0.0 && a < 1.0, || format!("a must lie in (0, 1), got {a}"))
}

pub fn make_neoclassical_growth(x0: f64, delta: f64, r: f64, a: f64) -> Result<ModelSpec> {
    check_common(x0, delta, r, a)?;
    growth_spec("neoclassical-growth", Technology::CobbDouglas { a }, x0, delta, r)
}

#[allow(non_snake_case)]
pub fn make_skiba_growth(x0: f64, delta: f64, r: f64, a: f64, A: f64, b1: f64, b2: f64) -> Result<ModelSpec> {
    check_common(x0, delta, r, a)?;
    require(A > 0.0 && A.is_finite(), || format!("A must be positive, got {A}"))?;
    require(b1 > 1.0 && b1.is_finite(), || format!("b1 must exceed 1, got {b1}"))?;
    require(b2 > 0.0 && b2.is_finite(), || format!("b2 must be positive, got {b2}"))?;
    let technology = Technology::ConcaveConvex { a, scale: A, b1, b2 };
    growth_spec("skiba-growth", technology, x0, delta, r)
}
