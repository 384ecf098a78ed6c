//! Matérn kernels on the time axis: pointwise values, running integrals,
//! Gram matrices and RKHS quadratic-form norms.
//!
//! Only the half-integer smoothness values 1/2, 3/2 and 5/2 are supported.
//! With `d = |t - t'| / ℓ` the kernel is `σ² m_ν(d)` where
//!
//! * `m_{1/2}(d) = exp(-d)`
//! * `m_{3/2}(d) = (1 + √3 d) exp(-√3 d)`
//! * `m_{5/2}(d) = (1 + √5 d + 5d²/3) exp(-√5 d)`

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance of the running-integral quadrature for ν ∈ {3/2, 5/2}.
pub const INTEGRAL_TOLERANCE: f64 = 1e-12;

/// Relative diagonal jitter (times σ²) added before factorising a Gram matrix.
pub const GRAM_JITTER: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            v if v == 0.5 => Ok(Self::Half),
            v if v == 1.5 => Ok(Self::ThreeHalves),
            v if v == 2.5 => Ok(Self::FiveHalves),
            other => Err(Error::InvalidParameter(format!(
                "Matérn smoothness must be 0.5, 1.5 or 2.5, got {other}"
            ))),
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }

    /// Unit-variance correlation at scaled distance `d >= 0`.
    #[inline]
    fn correlation(self, d: f64) -> f64 {
        match self {
            Self::Half => (-d).exp(),
            Self::ThreeHalves => {
                let s = 3f64.sqrt() * d;
                (1.0 + s) * (-s).exp()
            }
            Self::FiveHalves => {
                let s = 5f64.sqrt() * d;
                (1.0 + s + 5.0 * d * d / 3.0) * (-s).exp()
            }
        }
    }
}

/// Parameters of a Matérn kernel `k(t, t') = σ² m_ν(|t - t'| / ℓ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    nu: Smoothness,
    lengthscale: f64,
    scale: f64,
}

impl KernelSpec {
    pub fn new(nu: Smoothness, lengthscale: f64, scale: f64) -> Result<Self> {
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel lengthscale must be positive, got {lengthscale}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel scale must be positive, got {scale}"
            )));
        }
        Ok(Self { nu, lengthscale, scale })
    }

    /// Convenience constructor taking ν as a number.
    pub fn matern(nu: f64, lengthscale: f64, scale: f64) -> Result<Self> {
        Self::new(Smoothness::from_nu(nu)?, lengthscale, scale)
    }

    /// The baseline kernel used throughout the growth experiments: ν = 1/2, ℓ = 10, σ = 1.
    pub fn baseline() -> Self {
        Self {
            nu: Smoothness::Half,
            lengthscale: 10.0,
            scale: 1.0,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// σ², the value on the diagonal.
    pub fn variance(&self) -> f64 {
        self.scale * self.scale
    }

    #[inline]
    pub fn eval(&self, t: f64, t_prime: f64) -> f64 {
        self.variance() * self.nu.correlation((t - t_prime).abs() / self.lengthscale)
    }

    /// `∫₀^upper k(τ, center) dτ`.
    ///
    /// Closed form for ν = 1/2, adaptive Gauss–Legendre (split at the
    /// kernel's kink) otherwise.
    pub fn integral(&self, upper: f64, center: f64) -> Result<f64> {
        if !(upper >= 0.0) {
            return Err(Error::Domain(format!(
                "kernel integral upper limit must be non-negative, got {upper}"
            )));
        }
        if !(center >= 0.0) {
            return Err(Error::Domain(format!(
                "kernel integral center must be non-negative, got {center}"
            )));
        }
        Ok(match self.nu {
            Smoothness::Half => self.exponential_integral(upper, center),
            _ => self.quadrature_integral(upper, center, INTEGRAL_TOLERANCE),
        })
    }

    fn exponential_integral(&self, upper: f64, center: f64) -> f64 {
        let ell = self.lengthscale;
        let value = if upper <= center {
            // ℓ (e^{(u-c)/ℓ} - e^{-c/ℓ}) = ℓ e^{-c/ℓ} (e^{u/ℓ} - 1)
            ell * (-center / ell).exp() * (upper / ell).exp_m1()
        } else {
            // left piece up to the center plus the decaying right piece
            -ell * (-center / ell).exp_m1() - ell * (-(upper - center) / ell).exp_m1()
        };
        self.variance() * value
    }

    /// Adaptive Gauss–Legendre value of the same integral, split at the center.
    pub fn quadrature_integral(&self, upper: f64, center: f64, tol: f64) -> f64 {
        let f = |tau: f64| self.eval(tau, center);
        if center > 0.0 && center < upper {
            quadrature::integrate(f, 0.0, center, 0.5 * tol) + quadrature::integrate(f, center, upper, 0.5 * tol)
        } else {
            quadrature::integrate(f, 0.0, upper, tol)
        }
    }
}

/// Collocation points `t₁ < … < t_N`, all non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingGrid {
    points: Vec<f64>,
}

impl TrainingGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("training grid is empty".into()));
        }
        if let Some(p) = points.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "training grid points must be finite and non-negative, got {p}"
            )));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "training grid must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `n` equally spaced points on `[0, horizon]`, both ends included.
    pub fn equispaced(horizon: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "an equispaced grid needs at least 2 points, got {n}"
            )));
        }
        let step = horizon / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        points[n - 1] = horizon;
        Self::new(points)
    }

    /// The integer grid `{0, 1, …, last}`.
    pub fn integers(last: u32) -> Self {
        Self {
            points: (0..=last).map(f64::from).collect(),
        }
    }

    /// `n` i.i.d. uniform draws on `[0, horizon]`, sorted.
    pub fn uniform_iid(horizon: f64, n: usize, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut points: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest grid point, the training horizon T.
    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid is never empty")
    }
}

/// Symmetric kernel matrix `K[i][j] = k(t_i, t_j)` on a grid.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    grid: TrainingGrid,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn grid(&self) -> &TrainingGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Lower Cholesky factor of `K + jitter·σ²·I`.
    pub fn jittered_cholesky(&self, variance: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let jittered = &self.entries + DMatrix::identity(n, n) * (GRAM_JITTER * variance);
        jittered
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::Domain("Gram matrix is not positive definite".into()))
    }
}

pub fn kernel_eval(spec: &KernelSpec, t: f64, t_prime: f64) -> f64 {
    spec.eval(t, t_prime)
}

pub fn kernel_integral(spec: &KernelSpec, upper: f64, center: f64) -> Result<f64> {
    spec.integral(upper, center)
}

/// Assembles the Gram matrix. Rows are filled in parallel; every entry is
/// an independent evaluation, so the result does not depend on scheduling.
pub fn gram_matrix(spec: &KernelSpec, grid: &TrainingGrid) -> GramMatrix {
    let t = grid.points();
    let n = t.len();
    let rows: Vec<Vec<f64>> = t
        .par_iter()
        .map(|&ti| t.iter().map(|&tj| spec.eval(ti, tj)).collect())
        .collect();
    let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    GramMatrix {
        entries,
        grid: grid.clone(),
    }
}

/// `[∫₀^t k(τ, t_j) dτ]_j` for every grid point `t_j`.
pub fn integrated_kernel_row(spec: &KernelSpec, eval_time: f64, grid: &TrainingGrid) -> Result<DVector<f64>> {
    if !(eval_time >= 0.0) {
        return Err(Error::Domain(format!(
            "evaluation time must be non-negative, got {eval_time}"
        )));
    }
    let values = grid
        .points()
        .iter()
        .map(|&tj| spec.integral(eval_time, tj))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

/// Matrix of running integrals `I[i][j] = ∫₀^{t_i} k(τ, t_j) dτ`.
pub fn integral_matrix(spec: &KernelSpec, grid: &TrainingGrid) -> DMatrix<f64> {
    let t = grid.points();
    let n = t.len();
    let rows: Vec<Vec<f64>> = t
        .par_iter()
        .map(|&ti| {
            t.iter()
                .map(|&tj| spec.integral(ti, tj).expect("grid points are non-negative"))
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// `αᵀ K α`, the squared RKHS norm of `Σ_j α_j k(·, t_j)`.
pub fn rkhs_norm_sq(gram: &GramMatrix, coeffs: &[f64]) -> Result<f64> {
    let n = gram.dim();
    if coeffs.len() != n {
        return Err(Error::DimensionMismatch {
            context: "rkhs_norm_sq coefficients",
            expected: n,
            got: coeffs.len(),
        });
    }
    let k = &gram.entries;
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += k[(i, j)] * coeffs[j];
        }
        total += coeffs[i] * row;
    }
    Ok(total)
}
