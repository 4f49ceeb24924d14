//! The built-in experiments as data: a grid team with obstacles and a team
//! of unicycles.

mod grid;
mod uav;

pub use grid::{Cell, GridProblem, GridScenario, GridSubsystem};
pub use uav::{
    linear_terminal_cost, uav_running_cost, AgentState, ControlMode, TerminalParams, UavProblem, UavRun,
    UavRunningCost, UavScenario, UavSubsystem, UavTask, UavTaskChoice,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Names of the built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKey {
    Grid,
    UavExample1,
    UavExample2,
}

impl ScenarioKey {
    pub const ALL: [ScenarioKey; 3] = [Self::Grid, Self::UavExample1, Self::UavExample2];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Grid => "grid",
            Self::UavExample1 => "uav-example1",
            Self::UavExample2 => "uav-example2",
        }
    }
}

impl std::fmt::Display for ScenarioKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "scenario",
                key: s.to_string(),
            })
    }
}

/// A scenario of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Grid(GridScenario),
    Uav(UavScenario),
}

/// The built-in scenario named by `key`.
pub fn builtin_scenario(key: ScenarioKey) -> Scenario {
    match key {
        ScenarioKey::Grid => Scenario::Grid(GridScenario::default()),
        ScenarioKey::UavExample1 => Scenario::Uav(UavScenario::example1()),
        ScenarioKey::UavExample2 => Scenario::Uav(UavScenario::example2()),
    }
}
