//! Experiment configuration: TOML with one block per concern.

use std::path::Path;

use ridgeless::kernel::{KernelSpec, TrainingGrid};
use ridgeless::model::{
    make_asset_pricing, make_human_capital, make_neoclassical_growth, make_optimal_advertising, make_skiba_growth,
    Bounds, HumanCapitalParams, ModelSpec,
};
use ridgeless::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const REQUIRED_BLOCKS: [&str; 5] = ["model", "kernel", "grid", "solver", "experiment"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub kernel: KernelBlock,
    pub grid: GridBlock,
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Written into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub software: Option<Software>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    NeoclassicalGrowth,
    SkibaGrowth,
    AssetPricing,
    HumanCapital,
    OptimalAdvertising,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub name: ModelName,
    #[serde(default)]
    pub params: Params,
}

/// Union of every built-in model's parameters; unset fields take the
/// model's baseline value during resolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub A: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_k0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelBlock {
    pub nu: f64,
    pub ell: f64,
    pub sigma: f64,
}

impl Default for KernelBlock {
    fn default() -> Self {
        Self {
            nu: 0.5,
            ell: 10.0,
            sigma: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    Equispaced,
    Explicit,
    UniformIid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub mode: GridMode,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub lambda: f64,
    /// Overrides the model's own extra-penalty weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_p: Option<f64>,
    pub penalize_jump_derivatives: bool,
    pub residual_tolerance: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Box on `(x, μ, y)`; replaces the model's default box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsBlock>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            lambda: d.ridge_lambda,
            lambda_p: None,
            penalize_jump_derivatives: d.penalize_jump_derivatives,
            residual_tolerance: d.residual_tolerance,
            step_tolerance: d.step_tolerance,
            max_iterations: d.max_iterations,
            bounds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Solve,
    SweepInitialConditions,
    Robustness,
    Consistency,
    ShootingCompare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_list: Option<Vec<f64>>,
    /// `[from, to, count]`, expanded into `x0_list` on resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_range: Option<(f64, f64, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_ell_grid: Option<Vec<(f64, f64)>>,
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    /// Time up to which transversality is checked.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_horizon() -> f64 {
    200.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    pub emit_plot_data: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            emit_plot_data: true,
        }
    }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses and resolves: every default is made explicit and the result
    /// validated.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| invalid("", e.message().to_string()))?;
        for block in REQUIRED_BLOCKS {
            match table.get(block) {
                None => return Err(invalid(block, format!("missing [{block}] block"))),
                Some(v) if !v.is_table() => return Err(invalid(block, format!("[{block}] must be a table"))),
                Some(_) => {}
            }
        }
        let config: Self = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let field = e.path().to_string();
            invalid(field, e.into_inner().message().to_string())
        })?;
        config.resolve()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    fn resolve(mut self) -> Result<Self, CliError> {
        self.model.params = resolve_params(self.model.name, &self.model.params)?;
        self.software = None;
        if let Some((from, to, count)) = self.experiment.x0_range.take() {
            if self.experiment.x0_list.is_some() {
                return Err(invalid("experiment.x0_range", "give either x0_list or x0_range"));
            }
            if count < 2 || !(from < to) {
                return Err(invalid("experiment.x0_range", "needs from < to and count ≥ 2"));
            }
            let step = (to - from) / (count - 1) as f64;
            self.experiment.x0_list = Some(
                (0..count)
                    .map(|i| if i + 1 == count { to } else { from + i as f64 * step })
                    .collect(),
            );
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.kernel_spec()?;
        if self.experiment.kind == ExperimentKind::Consistency {
            // each cell builds its own grid from N_list
            match self.grid.horizon {
                Some(t) if t > 0.0 && t.is_finite() => {}
                _ => return Err(invalid("grid.T", "required and positive for consistency sweeps")),
            }
        } else {
            self.training_grid()?;
        }
        let model = self.model_spec()?;
        let s = &self.solver;
        if !(s.lambda > 0.0 && s.lambda.is_finite()) {
            return Err(invalid("solver.lambda", format!("must be positive, got {}", s.lambda)));
        }
        if let Some(w) = s.lambda_p {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid("solver.lambda_p", format!("must be non-negative, got {w}")));
            }
        }
        for (name, v) in [
            ("residual_tolerance", s.residual_tolerance),
            ("step_tolerance", s.step_tolerance),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("solver.{name}"), format!("must be positive, got {v}")));
            }
        }
        if s.max_iterations == 0 {
            return Err(invalid("solver.max_iterations", "must be positive"));
        }
        let e = &self.experiment;
        if !(e.horizon >= self.horizon()) {
            return Err(invalid("experiment.horizon", "must not lie before the grid horizon"));
        }
        match e.kind {
            ExperimentKind::SweepInitialConditions => {
                if model.state_dim() != 1 {
                    return Err(invalid(
                        "experiment.kind",
                        "initial-condition sweeps need a scalar state",
                    ));
                }
                match &e.x0_list {
                    Some(list) if !list.is_empty() => {
                        for (i, &x0) in list.iter().enumerate() {
                            model
                                .with_initial_state(vec![x0])
                                .map_err(|err| invalid(format!("experiment.x0_list[{i}]"), err.to_string()))?;
                        }
                    }
                    _ => return Err(invalid("experiment.x0_list", "required and non-empty for this kind")),
                }
            }
            ExperimentKind::Robustness => match &e.nu_ell_grid {
                Some(cells) if !cells.is_empty() => {
                    for (i, &(nu, ell)) in cells.iter().enumerate() {
                        KernelSpec::matern(nu, ell, self.kernel.sigma)
                            .map_err(|err| invalid(format!("experiment.nu_ell_grid[{i}]"), err.to_string()))?;
                    }
                }
                _ => {
                    return Err(invalid(
                        "experiment.nu_ell_grid",
                        "required and non-empty for this kind",
                    ))
                }
            },
            ExperimentKind::Consistency => {
                if self.grid.mode == GridMode::Explicit {
                    return Err(invalid("grid.mode", "consistency sweeps draw their own grids"));
                }
                match &e.n_list {
                    Some(list) if !list.is_empty() => {
                        if list.windows(2).any(|w| w[1] < w[0]) {
                            return Err(invalid("experiment.N_list", "must be non-decreasing"));
                        }
                        if list.iter().any(|&n| n < 2) {
                            return Err(invalid("experiment.N_list", "every N must be at least 2"));
                        }
                    }
                    _ => return Err(invalid("experiment.N_list", "required and non-empty for this kind")),
                }
            }
            ExperimentKind::Solve | ExperimentKind::ShootingCompare => {}
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let k = &self.kernel;
        if ![0.5, 1.5, 2.5].contains(&k.nu) {
            return Err(invalid("kernel.nu", format!("must be 0.5, 1.5 or 2.5, got {}", k.nu)));
        }
        if !(k.ell > 0.0 && k.ell.is_finite()) {
            return Err(invalid("kernel.ell", format!("must be positive, got {}", k.ell)));
        }
        if !(k.sigma > 0.0 && k.sigma.is_finite()) {
            return Err(invalid("kernel.sigma", format!("must be positive, got {}", k.sigma)));
        }
        KernelSpec::matern(k.nu, k.ell, k.sigma).map_err(|e| invalid("kernel", e.to_string()))
    }

    pub fn training_grid(&self) -> Result<TrainingGrid, CliError> {
        let g = &self.grid;
        let horizon = || match g.horizon {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(invalid("grid.T", format!("must be positive, got {t}"))),
            None => Err(invalid("grid.T", "required for this grid mode")),
        };
        let count = || match g.n {
            Some(n) if n >= 2 => Ok(n),
            Some(n) => Err(invalid("grid.N", format!("must be at least 2, got {n}"))),
            None => Err(invalid("grid.N", "required for this grid mode")),
        };
        let built = match g.mode {
            GridMode::Equispaced => TrainingGrid::equispaced(horizon()?, count()?),
            GridMode::UniformIid => TrainingGrid::uniform_iid(horizon()?, count()?, g.seed),
            GridMode::Explicit => {
                let points = g
                    .points
                    .clone()
                    .ok_or_else(|| invalid("grid.points", "required for explicit grids"))?;
                if points.iter().any(|p| !(p >= &0.0) || !p.is_finite()) {
                    return Err(invalid("grid.points", "points must be finite and non-negative"));
                }
                if points.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("grid.points", "points must be strictly increasing"));
                }
                TrainingGrid::new(points)
            }
        };
        let grid = built.map_err(|e| invalid("grid", e.to_string()))?;
        if grid.len() < 2 {
            return Err(invalid("grid", "the solver needs at least two grid points"));
        }
        Ok(grid)
    }

    /// Training horizon `T`.
    pub fn horizon(&self) -> f64 {
        match (self.grid.mode, &self.grid.points) {
            (GridMode::Explicit, Some(p)) => p.last().copied().unwrap_or(0.0),
            _ => self.grid.horizon.unwrap_or(0.0),
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let p = &self.model.params;
        let v = |x: Option<f64>| x.expect("resolved parameter");
        let built = match self.model.name {
            ModelName::NeoclassicalGrowth => make_neoclassical_growth(v(p.x0), v(p.delta), v(p.r), v(p.a)),
            ModelName::SkibaGrowth => make_skiba_growth(v(p.x0), v(p.delta), v(p.r), v(p.a), v(p.A), v(p.b1), v(p.b2)),
            ModelName::AssetPricing => make_asset_pricing(v(p.x0), v(p.c), v(p.g), v(p.r)),
            ModelName::OptimalAdvertising => make_optimal_advertising(v(p.x0), v(p.r), v(p.c), v(p.beta), v(p.kappa)),
            ModelName::HumanCapital => make_human_capital(HumanCapitalParams {
                x_k0: v(p.x_k0),
                x_h0: v(p.x_h0),
                delta_k: v(p.delta_k),
                delta_h: v(p.delta_h),
                a_k: v(p.a_k),
                a_h: v(p.a_h),
                r: v(p.r),
                lambda_p: v(p.lambda_p),
            }),
        };
        let mut model = built.map_err(|e| invalid("model.params", e.to_string()))?;
        if let Some(b) = &self.solver.bounds {
            let n = model.n_vars();
            if b.lower.len() != n || b.upper.len() != n {
                return Err(invalid(
                    "solver.bounds",
                    format!("needs {n} entries in lower and upper"),
                ));
            }
            model = model
                .with_bounds(Bounds {
                    lower: b.lower.clone(),
                    upper: b.upper.clone(),
                })
                .map_err(|e| invalid("solver.bounds", e.to_string()))?;
        }
        Ok(model)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            ridge_lambda: s.lambda,
            extra_penalty_weight: s.lambda_p,
            penalize_jump_derivatives: s.penalize_jump_derivatives,
            max_iterations: s.max_iterations,
            residual_tolerance: s.residual_tolerance,
            step_tolerance: s.step_tolerance,
            seed: self.grid.seed,
            ..SolverConfig::default()
        }
    }
}

/// Fills unset parameters with the model's baseline and rejects ones the
/// model does not take.
fn resolve_params(name: ModelName, given: &Params) -> Result<Params, CliError> {
    let hc = HumanCapitalParams::default();
    let defaults = match name {
        ModelName::NeoclassicalGrowth => Params {
            x0: Some(1.0),
            delta: Some(0.1),
            r: Some(0.11),
            a: Some(1.0 / 3.0),
            ..Params::default()
        },
        ModelName::SkibaGrowth => Params {
            x0: Some(1.0),
            delta: Some(0.1),
            r: Some(0.11),
            a: Some(1.0 / 3.0),
            A: Some(0.5),
            b1: Some(3.0),
            b2: Some(2.5),
            ..Params::default()
        },
        ModelName::AssetPricing => Params {
            x0: Some(1.0),
            c: Some(0.02),
            g: Some(-0.2),
            r: Some(0.1),
            ..Params::default()
        },
        ModelName::OptimalAdvertising => Params {
            x0: Some(0.4),
            r: Some(0.11),
            c: Some(0.5),
            beta: Some(0.05),
            kappa: Some(0.5),
            ..Params::default()
        },
        ModelName::HumanCapital => Params {
            x_k0: Some(hc.x_k0),
            x_h0: Some(hc.x_h0),
            delta_k: Some(hc.delta_k),
            delta_h: Some(hc.delta_h),
            a_k: Some(hc.a_k),
            a_h: Some(hc.a_h),
            r: Some(hc.r),
            lambda_p: Some(hc.lambda_p),
            ..Params::default()
        },
    };
    let given_v = toml::Value::try_from(given).expect("params serialise");
    let default_v = toml::Value::try_from(&defaults).expect("params serialise");
    let (given_t, mut merged) = (
        given_v.as_table().expect("table"),
        default_v.as_table().expect("table").clone(),
    );
    for (key, value) in given_t {
        if !merged.contains_key(key) {
            return Err(invalid(format!("model.params.{key}"), "not a parameter of this model"));
        }
        merged.insert(key.clone(), value.clone());
    }
    Ok(toml::Value::Table(merged)
        .try_into()
        .expect("merged params deserialise"))
}
