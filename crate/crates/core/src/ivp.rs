//! Dormand–Prince 5(4) with embedded error control and cubic Hermite
//! dense output.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            initial_step: 1e-3,
            min_step: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// Why the integration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    Horizon,
    /// The caller's stop predicate fired.
    Event,
}

/// Accepted step points with states and derivatives.
#[derive(Clone, Debug, Default)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    pub stop: Option<Stop>,
}

impl OdeSolution {
    /// Cubic Hermite interpolation between accepted steps; `None` outside
    /// the integrated span.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        if self.times.len() == 1 {
            return Some(self.states[0].clone());
        }
        Some(hermite(
            self.times[k],
            self.times[k + 1],
            &self.states[k],
            &self.states[k + 1],
            &self.derivatives[k],
            &self.derivatives[k + 1],
            t,
        ))
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("solution has at least the initial point")
    }
}

pub(crate) fn hermite(t0: f64, t1: f64, y0: &[f64], y1: &[f64], d0: &[f64], d1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i])
        .collect()
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th and 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `ẏ = f(t, y)` from `t0` to `t_end`. `stop` is checked after
/// every accepted step; returning `true` ends the run early with
/// [`Stop::Event`]. Errors from `f` on an accepted point propagate; errors
/// inside a trial step shrink the step instead.
pub fn dopri5<F, S>(mut f: F, t0: f64, y0: &[f64], t_end: f64, options: &OdeOptions, mut stop: S) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y)?;
    let mut out = OdeSolution {
        times: vec![t],
        states: vec![y.clone()],
        derivatives: vec![k1.clone()],
        stop: None,
    };
    if t_end <= t0 {
        out.stop = Some(Stop::Horizon);
        return Ok(out);
    }
    let mut h = options.initial_step.min(t_end - t0).min(options.max_step);
    let mut steps = 0;
    let mut last_error: Option<Error> = None;

    while t < t_end {
        if steps >= options.max_steps {
            return Err(Error::StepUnderflow { time: t });
        }
        steps += 1;
        if h < options.min_step {
            return Err(last_error.take().unwrap_or(Error::StepUnderflow { time: t }));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let mut k = vec![k1.clone()];
        let mut failed = false;
        let mut y_new = vec![0.0; n];
        for stage in 1..7 {
            let ys: Vec<f64> = (0..n)
                .map(|i| y[i] + h * (0..stage).map(|j| A[stage][j] * k[j][i]).sum::<f64>())
                .collect();
            if stage == 6 {
                y_new.clone_from(&ys);
            }
            match f(t + C[stage] * h, &ys) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => k.push(v),
                Ok(_) => {
                    failed = true;
                    break;
                }
                Err(e) => {
                    last_error = Some(e);
                    failed = true;
                    break;
                }
            }
        }
        if failed || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            continue;
        }

        let mut err_sq = 0.0;
        for i in 0..n {
            let e: f64 = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let scale = options.atol + options.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / n.max(1) as f64).sqrt();

        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k.pop().expect("seven stages");
            out.times.push(t);
            out.states.push(y.clone());
            out.derivatives.push(k1.clone());
            last_error = None;
            if stop(t, &y) {
                out.stop = Some(Stop::Event);
                return Ok(out);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(options.max_step);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    out.stop = Some(Stop::Horizon);
    Ok(out)
}
