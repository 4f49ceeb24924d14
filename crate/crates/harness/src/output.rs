//! Delimited-text artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lsoc::discrete::TeamTrajectory;
use lsoc::scenarios::{GridScenario, UavRun};

use crate::error::{HarnessError, Result};

/// One trajectory file: a row per agent per step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub state_names: Vec<&'static str>,
    pub control_names: Vec<&'static str>,
    pub rows: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub agent: usize,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    pub running_cost: f64,
}

impl TrajectoryTable {
    pub fn header(&self) -> String {
        let mut cols = vec!["time", "agent"];
        cols.extend(&self.state_names);
        cols.extend(&self.control_names);
        cols.push("running_cost");
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{}", r.time, r.agent).unwrap();
            for v in r.state.iter().chain(&r.control) {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{}", r.running_cost).unwrap();
        }
        out
    }

    /// Sum of the running-cost column for one agent.
    pub fn running_total(&self, agent: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.agent == agent)
            .map(|r| r.running_cost)
            .sum()
    }
}

/// Grid trajectory: state is the current cell, control the chosen next cell.
pub fn grid_table(scenario: &GridScenario, traj: &TeamTrajectory) -> TrajectoryTable {
    let mut rows = Vec::new();
    for t in 0..traj.steps() {
        for (i, (&now, &next)) in traj.locals[t].iter().zip(&traj.locals[t + 1]).enumerate() {
            let (a, b) = (scenario.cell_at(now), scenario.cell_at(next));
            rows.push(TrajectoryRow {
                time: t as f64,
                agent: i + 1,
                state: vec![a[0] as f64, a[1] as f64],
                control: vec![b[0] as f64, b[1] as f64],
                running_cost: traj.costs[t][i],
            });
        }
    }
    TrajectoryTable {
        state_names: vec!["row", "col"],
        control_names: vec!["next_row", "next_col"],
        rows,
    }
}

/// Unicycle trajectory: state `(x, y, v, phi)`, control `(u, omega)`.
pub fn uav_table(run: &UavRun) -> TrajectoryTable {
    let mut rows = Vec::new();
    for (k, (x, u)) in run.states.iter().zip(&run.controls).enumerate() {
        for a in 0..run.costs[k].len() {
            rows.push(TrajectoryRow {
                time: k as f64 * run.dt,
                agent: a + 1,
                state: x[4 * a..4 * a + 4].to_vec(),
                control: u[2 * a..2 * a + 2].to_vec(),
                running_cost: run.costs[k][a],
            });
        }
    }
    TrajectoryTable {
        state_names: vec!["x", "y", "v", "phi"],
        control_names: vec!["u", "omega"],
        rows,
    }
}

/// Planar path of every agent as `agent,x,y` rows, one series per agent.
pub fn plot_csv(paths: &[Vec<[f64; 2]>]) -> String {
    let mut out = String::from("agent,x,y\n");
    for (a, path) in paths.iter().enumerate() {
        for p in path {
            writeln!(out, "{},{},{}", a + 1, p[0], p[1]).unwrap();
        }
    }
    out
}

pub fn grid_paths(scenario: &GridScenario, traj: &TeamTrajectory) -> Vec<Vec<[f64; 2]>> {
    let n = traj.locals[0].len();
    (0..n)
        .map(|i| {
            traj.locals
                .iter()
                .map(|row| {
                    let c = scenario.cell_at(row[i]);
                    [c[1] as f64, c[0] as f64]
                })
                .collect()
        })
        .collect()
}

pub fn uav_paths(run: &UavRun) -> Vec<Vec<[f64; 2]>> {
    let n = run.states[0].len() / 4;
    (0..n)
        .map(|a| run.states.iter().map(|x| [x[4 * a], x[4 * a + 1]]).collect())
        .collect()
}

/// Mixing-weight trace: `time,subsystem,w1,...,wF`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightTrace {
    pub n_components: usize,
    pub rows: Vec<(f64, usize, Vec<f64>)>,
}

impl WeightTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,subsystem");
        for f in 1..=self.n_components {
            write!(out, ",w{f}").unwrap();
        }
        out.push('\n');
        for (t, s, w) in &self.rows {
            write!(out, "{t},{s}").unwrap();
            for v in w {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}
