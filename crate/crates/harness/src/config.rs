//! Experiment configuration in TOML.
//!
//! ```toml
//! scenario = "grid"          # grid | uav-example1 | uav-example2
//! mode = "compose"           # solve-component | run-component | compose | compare | weights
//! seed = 0
//! runs = 1                   # seeded runs: seed, seed + 1, ...
//! component = 0              # task index, required by run-component
//! control = "receding"       # receding | tape (unicycle scenarios)
//! out = "out"                # output directory
//! kernel_width = 0.1         # overrides the scenario's kernel width
//!
//! [sampling]                 # path-integral estimation
//! n_rollouts = 1000
//! dt = 0.05
//! horizon_steps = 100
//!
//! [solver]                   # desirability solver
//! tol = 1e-12
//! max_iter = 100000
//! compare_tol = 1e-9
//!
//! [grid]                     # any GridScenario field, e.g.
//! obstacles = [[3, 2], [4, 2]]
//!
//! [uav]                      # any UavScenario field, e.g.
//! acceptance_radius = 3.0
//! ```
//!
//! Every key is optional except that `scenario` must come from the file or
//! the command line. Unknown keys are rejected.

use std::path::PathBuf;

use lsoc::continuous::SamplingParams;
use lsoc::discrete::SolverOptions;
use lsoc::scenarios::{builtin_scenario, ControlMode, Scenario, ScenarioKey};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveComponent,
    RunComponent,
    #[default]
    Compose,
    Compare,
    Weights,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SolveComponent => "solve-component",
            Self::RunComponent => "run-component",
            Self::Compose => "compose",
            Self::Compare => "compare",
            Self::Weights => "weights",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_rollouts: usize,
    pub dt: f64,
    pub horizon_steps: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let p = SamplingParams::default();
        Self {
            n_rollouts: p.n_rollouts,
            dt: p.dt,
            horizon_steps: p.horizon_steps,
        }
    }
}

impl SamplingConfig {
    pub fn params(&self) -> SamplingParams {
        SamplingParams {
            n_rollouts: self.n_rollouts,
            dt: self.dt,
            horizon_steps: self.horizon_steps,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Tolerance of the composite-versus-direct comparison.
    pub compare_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            compare_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions::default()
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
    }
}

/// The file as written.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    mode: Option<Mode>,
    seed: Option<u64>,
    runs: Option<usize>,
    component: Option<usize>,
    control: Option<ControlMode>,
    out: Option<PathBuf>,
    kernel_width: Option<f64>,
    sampling: SamplingConfig,
    solver: SolverConfig,
    grid: Option<toml::Table>,
    uav: Option<toml::Table>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub component: Option<usize>,
    pub samples: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
    pub control: Option<ControlMode>,
    pub out: Option<PathBuf>,
}

/// A validated experiment with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario_key: String,
    pub scenario: Scenario,
    pub mode: Mode,
    pub seed: u64,
    pub runs: usize,
    pub component: Option<usize>,
    pub control: ControlMode,
    /// Not echoed into artifacts, so outputs do not depend on where they go.
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub sampling: SamplingConfig,
    pub solver: SolverConfig,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.chars().rev().take_while(|c| *c != '\n').count() + 1;
    (line, column)
}

/// Replaces fields of `base` with the entries of `table`.
fn overlay<T: Serialize + DeserializeOwned>(base: &T, table: toml::Table, section: &str) -> Result<T> {
    let mut merged = toml::Table::try_from(base).map_err(|e| HarnessError::field(section, e.to_string()))?;
    merged.extend(table);
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::field(section, e.message().trim().to_string()))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::field(field, format!("must be positive, got {v}")))
    }
}

fn nonzero(field: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(HarnessError::field(field, "must be positive"))
    }
}

/// Parses and validates a configuration file.
pub fn load_config(text: &str) -> Result<ExperimentConfig> {
    load_config_with(text, &Overrides::default())
}

/// [`load_config`] with command-line overrides applied before validation.
pub fn load_config_with(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((1, 1));
        HarnessError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;

    let key_text = overrides
        .scenario
        .clone()
        .or(raw.scenario)
        .ok_or_else(|| HarnessError::field("scenario", "missing"))?;
    let key: ScenarioKey = key_text
        .parse()
        .map_err(|e: lsoc::Error| HarnessError::field("scenario", e.to_string()))?;

    let mut scenario = builtin_scenario(key);
    match &mut scenario {
        Scenario::Grid(g) => {
            if raw.uav.is_some() {
                return Err(HarnessError::field(
                    "uav",
                    format!("not applicable to scenario `{key}`"),
                ));
            }
            if let Some(t) = raw.grid {
                *g = overlay(g, t, "grid")?;
            }
            if let Some(w) = raw.kernel_width {
                g.kernel_width = w;
            }
        }
        Scenario::Uav(u) => {
            if raw.grid.is_some() {
                return Err(HarnessError::field(
                    "grid",
                    format!("not applicable to scenario `{key}`"),
                ));
            }
            if let Some(t) = raw.uav {
                *u = overlay(u, t, "uav")?;
            }
            if let Some(w) = raw.kernel_width {
                u.kernel_width = w;
            }
        }
    }

    let mut sampling = raw.sampling;
    sampling.n_rollouts = overrides.samples.unwrap_or(sampling.n_rollouts);
    sampling.dt = overrides.dt.unwrap_or(sampling.dt);
    sampling.horizon_steps = overrides.horizon.unwrap_or(sampling.horizon_steps);
    let mut solver = raw.solver;
    solver.tol = overrides.tol.unwrap_or(solver.tol);

    let config = ExperimentConfig {
        scenario_key: key.to_string(),
        scenario,
        mode: overrides.mode.or(raw.mode).unwrap_or_default(),
        seed: overrides.seed.or(raw.seed).unwrap_or(0),
        runs: overrides.runs.or(raw.runs).unwrap_or(1),
        component: overrides.component.or(raw.component),
        control: overrides.control.or(raw.control).unwrap_or_default(),
        out: overrides.out.clone().or(raw.out),
        sampling,
        solver,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        nonzero("runs", self.runs)?;
        nonzero("sampling.n_rollouts", self.sampling.n_rollouts)?;
        positive("dt", self.sampling.dt)?;
        nonzero("sampling.horizon_steps", self.sampling.horizon_steps)?;
        positive("solver.tol", self.solver.tol)?;
        nonzero("solver.max_iter", self.solver.max_iter)?;
        positive("solver.compare_tol", self.solver.compare_tol)?;

        let (section, n_components) = match &self.scenario {
            Scenario::Grid(g) => {
                g.validate()
                    .map_err(|e| HarnessError::field("grid", e.to_string()))?;
                ("grid", g.components.len())
            }
            Scenario::Uav(u) => {
                u.validate()
                    .map_err(|e| HarnessError::field("uav", e.to_string()))?;
                if matches!(self.mode, Mode::SolveComponent | Mode::Compare) {
                    return Err(HarnessError::field(
                        "mode",
                        format!("`{}` needs a discrete scenario", self.mode.as_str()),
                    ));
                }
                ("uav", u.components.len())
            }
        };
        match (self.mode, self.component) {
            (Mode::RunComponent, None) => {
                return Err(HarnessError::field(
                    "component",
                    "required by mode `run-component`",
                ))
            }
            (_, Some(c)) if c >= n_components => {
                return Err(HarnessError::field(
                    "component",
                    format!("{c} is out of range; `{section}` has {n_components} component tasks"),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_columns() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
