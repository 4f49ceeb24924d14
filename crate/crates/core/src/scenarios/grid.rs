//! Three agents on a 5x5 grid with random wind, obstacle cells and a path
//! communication graph `1 - 2 - 3`.
//!
//! Cells are `[row, col]` pairs counted from 1. The local state index of cell
//! `[r, c]` is `(r - 1) * cols + (c - 1)`.

use serde::{Deserialize, Serialize};

use crate::compose::{composite_terminal_costs, composition_weights, KernelSpec};
use crate::discrete::{
    build_linear_system, rollout_team, DiscreteJointMdp, JointPolicy, LinearSystem, LocalKernel, TeamAgent,
    TeamTrajectory,
};
use crate::graph::{factorize, AgentGraph, FactorialSubsystem, JointSpace};
use crate::{Error, Result};

pub type Cell = [usize; 2];

/// Parameters of the grid experiment. Defaults are the built-in scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridScenario {
    pub rows: usize,
    pub cols: usize,
    pub obstacles: Vec<Cell>,
    /// `o(x)` on obstacle cells.
    pub obstacle_value: f64,
    /// `o(x)` on every other cell.
    pub free_value: f64,
    /// Weight of the Manhattan distance between agents 1 and 2.
    pub distance_weight: f64,
    /// Terminal cost of boundary states other than the task's target.
    pub miss_cost: f64,
    pub edges: Vec<(usize, usize)>,
    /// Initial cell of each agent.
    pub initial: Vec<Cell>,
    /// Component tasks; `components[f][i]` is agent `i + 1`'s target.
    pub components: Vec<Vec<Cell>>,
    pub composite: Vec<Cell>,
    /// Isotropic kernel width over target coordinates.
    pub kernel_width: f64,
    pub step_cap: usize,
}

impl Default for GridScenario {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            obstacles: vec![[3, 2], [4, 2]],
            obstacle_value: 50.0,
            free_value: 2.5,
            distance_weight: 3.5,
            miss_cost: 10.0,
            edges: vec![(1, 2), (2, 3)],
            initial: vec![[5, 1], [4, 1], [1, 1]],
            components: vec![vec![[2, 2], [2, 2], [4, 5]], vec![[3, 3], [3, 3], [5, 4]]],
            composite: vec![[2, 3], [2, 3], [5, 5]],
            kernel_width: 0.1,
            step_cap: 200,
        }
    }
}

impl GridScenario {
    pub fn n_agents(&self) -> usize {
        self.initial.len()
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_index(&self, cell: Cell) -> usize {
        (cell[0] - 1) * self.cols + (cell[1] - 1)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        [index / self.cols + 1, index % self.cols + 1]
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles.contains(&cell)
    }

    /// `o(x)`.
    pub fn cell_value(&self, cell: Cell) -> f64 {
        if self.is_obstacle(cell) {
            self.obstacle_value
        } else {
            self.free_value
        }
    }

    fn on_grid(&self, cell: Cell) -> bool {
        (1..=self.rows).contains(&cell[0]) && (1..=self.cols).contains(&cell[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("rows", "grid must be nonempty"));
        }
        if self.n_agents() != 3 {
            return Err(Error::invalid(
                "initial",
                "the grid costs are defined for three agents",
            ));
        }
        for (name, v) in [
            ("obstacle_value", self.obstacle_value),
            ("free_value", self.free_value),
            ("distance_weight", self.distance_weight),
            ("miss_cost", self.miss_cost),
            ("kernel_width", self.kernel_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.step_cap == 0 {
            return Err(Error::invalid("step_cap", "must be positive"));
        }
        if self.components.is_empty() {
            return Err(Error::invalid("components", "need at least one component task"));
        }
        if let Some(c) = self.obstacles.iter().find(|c| !self.on_grid(**c)) {
            return Err(Error::invalid("obstacles", format!("cell {c:?} is off the grid")));
        }
        let tasks = self
            .components
            .iter()
            .map(|t| ("components", t))
            .chain([("composite", &self.composite), ("initial", &self.initial)]);
        for (name, cells) in tasks {
            if cells.len() != self.n_agents() {
                return Err(Error::DimensionMismatch {
                    what: "cells per task",
                    expected: self.n_agents(),
                    got: cells.len(),
                });
            }
            for &c in cells {
                if !self.on_grid(c) {
                    return Err(Error::invalid(name, format!("cell {c:?} is off the grid")));
                }
                if self.is_obstacle(c) {
                    return Err(Error::invalid(name, format!("cell {c:?} is an obstacle")));
                }
            }
        }
        Ok(())
    }

    /// State cost of the subsystem centred on `subsystem`, before shifting.
    /// `cells` lists the members' cells in ascending agent order.
    pub fn state_cost(&self, subsystem: usize, cells: &[Cell]) -> Result<f64> {
        let manhattan = |a: Cell, b: Cell| a[0].abs_diff(b[0]) as f64 + a[1].abs_diff(b[1]) as f64;
        let o = |c: Cell| self.cell_value(c);
        let expect = |n: usize| {
            if cells.len() == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    what: "subsystem cells",
                    expected: n,
                    got: cells.len(),
                })
            }
        };
        match subsystem {
            1 => {
                expect(2)?;
                Ok(self.distance_weight * manhattan(cells[0], cells[1]) + o(cells[0]) * o(cells[1]))
            }
            2 => {
                expect(3)?;
                Ok(self.distance_weight * manhattan(cells[0], cells[1])
                    + o(cells[0]) * o(cells[1]) * o(cells[2]))
            }
            3 => {
                expect(2)?;
                Ok(self.distance_weight * o(cells[0]) * o(cells[1]))
            }
            _ => Err(Error::Unknown {
                kind: "grid subsystem",
                key: subsystem.to_string(),
            }),
        }
    }

    /// Cells that end agent `agent`'s episode: its target in any task.
    pub fn candidate_cells(&self, agent: usize) -> Vec<Cell> {
        let mut out: Vec<Cell> = self
            .components
            .iter()
            .chain([&self.composite])
            .map(|t| t[agent - 1])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Builds the per-subsystem problems.
    pub fn build(&self) -> Result<GridProblem> {
        self.validate()?;
        let graph = AgentGraph::new(self.n_agents(), self.edges.iter().copied())?;
        let subsystems = factorize(&graph)?
            .into_iter()
            .map(|s| GridSubsystem::build(self, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridProblem {
            scenario: self.clone(),
            subsystems,
        })
    }
}

/// One factorial subsystem of the grid team with its component tasks.
#[derive(Debug, Clone)]
pub struct GridSubsystem {
    pub subsystem: FactorialSubsystem,
    /// Shares structure across tasks; carries the first component's
    /// terminal cost.
    pub mdp: DiscreteJointMdp,
    /// Amount subtracted from the raw state cost so its interior minimum is 0.
    pub cost_shift: f64,
    /// `component_costs[f]`: terminal cost of task `f` by boundary position.
    pub component_costs: Vec<Vec<f64>>,
    /// Members' target coordinates `(r, c, r, c, ...)` per component.
    pub targets: Vec<Vec<f64>>,
    pub composite_target: Vec<f64>,
    pub kernel: KernelSpec,
}

fn target_coords(cells: &[Cell]) -> Vec<f64> {
    cells.iter().flat_map(|c| [c[0] as f64, c[1] as f64]).collect()
}

impl GridSubsystem {
    fn build(sc: &GridScenario, subsystem: FactorialSubsystem) -> Result<Self> {
        let members = subsystem.members().to_vec();
        let space = JointSpace::for_subsystem(&subsystem, |_| sc.n_cells())?;
        let kernels = vec![LocalKernel::grid_wind(sc.rows, sc.cols); members.len()];
        let candidates: Vec<Vec<usize>> = members
            .iter()
            .map(|&a| {
                sc.candidate_cells(a)
                    .into_iter()
                    .map(|c| sc.cell_index(c))
                    .collect()
            })
            .collect();
        let is_boundary: Vec<bool> = (0..space.len())
            .map(|s| {
                candidates
                    .iter()
                    .enumerate()
                    .all(|(k, cand)| cand.contains(&space.component(s, k)))
            })
            .collect();

        let mut raw = vec![0.0; space.len()];
        let mut cells = Vec::with_capacity(members.len());
        for (s, r) in raw.iter_mut().enumerate() {
            cells.clear();
            cells.extend((0..members.len()).map(|k| sc.cell_at(space.component(s, k))));
            *r = sc.state_cost(subsystem.central(), &cells)?;
        }
        let shift = raw
            .iter()
            .zip(&is_boundary)
            .filter(|(_, b)| !**b)
            .map(|(q, _)| *q)
            .fold(f64::INFINITY, f64::min);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let q: Vec<f64> = raw.iter().map(|r| r - shift).collect();

        let task_cost = |task: &[Cell]| -> Vec<f64> {
            let goal: Vec<usize> = members.iter().map(|&a| sc.cell_index(task[a - 1])).collect();
            let goal = space.flatten(&goal).expect("targets lie on the grid");
            (0..space.len())
                .filter(|&s| is_boundary[s])
                .map(|s| if s == goal { 0.0 } else { sc.miss_cost })
                .collect()
        };
        let component_costs: Vec<Vec<f64>> = sc.components.iter().map(|t| task_cost(t)).collect();
        let mdp = DiscreteJointMdp::new(space, kernels, &is_boundary, &q, component_costs[0].clone())?;

        let pick = |task: &[Cell]| -> Vec<Cell> { members.iter().map(|&a| task[a - 1]).collect() };
        let targets = sc.components.iter().map(|t| target_coords(&pick(t))).collect();
        let composite_target = target_coords(&pick(&sc.composite));
        let kernel = KernelSpec::isotropic(2 * members.len(), sc.kernel_width)?;
        Ok(Self {
            subsystem,
            mdp,
            cost_shift: shift,
            component_costs,
            targets,
            composite_target,
            kernel,
        })
    }

    /// Kernel weights of the composite target against the component targets.
    pub fn weights(&self) -> Result<Vec<f64>> {
        composition_weights(&self.targets, &self.composite_target, &self.kernel)
    }

    /// Terminal cost of the composite task implied by the kernel weights.
    pub fn composite_cost(&self) -> Result<Vec<f64>> {
        composite_terminal_costs(&self.weights()?, &self.component_costs)
    }

    pub fn linear_system(&self) -> LinearSystem {
        build_linear_system(&self.mdp)
    }

    pub fn task_mdp(&self, task: usize) -> Result<DiscreteJointMdp> {
        let h = self.component_costs.get(task).ok_or_else(|| Error::Unknown {
            kind: "component task",
            key: task.to_string(),
        })?;
        self.mdp.with_terminal_cost(h.clone())
    }

    pub fn composite_mdp(&self) -> Result<DiscreteJointMdp> {
        self.mdp.with_terminal_cost(self.composite_cost()?)
    }
}

/// The grid team split into its subsystems.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub scenario: GridScenario,
    pub subsystems: Vec<GridSubsystem>,
}

impl GridProblem {
    pub fn initial_locals(&self) -> Vec<usize> {
        self.scenario
            .initial
            .iter()
            .map(|&c| self.scenario.cell_index(c))
            .collect()
    }

    /// Local states of a task's targets; `None` selects the composite task.
    pub fn target_locals(&self, task: Option<usize>) -> Result<Vec<usize>> {
        let sc = &self.scenario;
        let cells = match task {
            None => &sc.composite,
            Some(f) => sc.components.get(f).ok_or_else(|| Error::Unknown {
                kind: "component task",
                key: f.to_string(),
            })?,
        };
        Ok(cells.iter().map(|&c| sc.cell_index(c)).collect())
    }

    /// Runs the team with one policy per subsystem until every agent sits on
    /// its target for `task`, every subsystem is absorbed, or the step cap.
    /// `mdps[i]` must carry the terminal cost the policy was derived for.
    pub fn rollout(
        &self,
        mdps: &[&DiscreteJointMdp],
        policies: &[&dyn JointPolicy],
        task: Option<usize>,
        seed: u64,
    ) -> Result<TeamTrajectory> {
        let n = self.subsystems.len();
        if mdps.len() != n || policies.len() != n {
            return Err(Error::DimensionMismatch {
                what: "subsystem policies",
                expected: n,
                got: policies.len().min(mdps.len()),
            });
        }
        let agents: Vec<TeamAgent<'_>> = (0..n)
            .map(|k| TeamAgent {
                agent: self.subsystems[k].subsystem.central(),
                mdp: mdps[k],
                policy: policies[k],
            })
            .collect();
        let goal = self.target_locals(task)?;
        rollout_team(
            &agents,
            &self.initial_locals(),
            seed,
            self.scenario.step_cap,
            |x| x == goal,
        )
    }

    /// Whether any agent ever stood on an obstacle.
    pub fn touches_obstacle(&self, traj: &TeamTrajectory) -> bool {
        let sc = &self.scenario;
        traj.locals
            .iter()
            .any(|row| row.iter().any(|&l| sc.is_obstacle(sc.cell_at(l))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_cost_examples() {
        let g = GridScenario::default();
        assert_eq!(g.state_cost(1, &[[1, 1], [1, 1]]).unwrap(), 6.25);
        assert_eq!(g.state_cost(1, &[[1, 1], [2, 3]]).unwrap(), 16.75);
        assert_eq!(g.state_cost(3, &[[1, 1], [5, 5]]).unwrap(), 21.875);
        assert_eq!(
            g.state_cost(2, &[[3, 2], [1, 1], [1, 1]]).unwrap(),
            3.5 * 3.0 + 50.0 * 6.25
        );
        assert!(matches!(g.state_cost(4, &[[1, 1]]), Err(Error::Unknown { .. })));
        assert!(g.state_cost(1, &[[1, 1]]).is_err());
    }

    #[test]
    fn swapping_agents_one_and_two_keeps_costs() {
        let g = GridScenario::default();
        for a in 0..25 {
            for b in 0..25 {
                let (x, y) = (g.cell_at(a), g.cell_at(b));
                assert_eq!(
                    g.state_cost(1, &[x, y]).unwrap(),
                    g.state_cost(1, &[y, x]).unwrap()
                );
                assert_eq!(
                    g.state_cost(2, &[x, y, [5, 5]]).unwrap(),
                    g.state_cost(2, &[y, x, [5, 5]]).unwrap()
                );
            }
        }
    }

    #[test]
    fn cells_round_trip() {
        let g = GridScenario::default();
        for i in 0..25 {
            assert_eq!(g.cell_index(g.cell_at(i)), i);
        }
        assert_eq!(g.cell_index([1, 1]), 0);
        assert_eq!(g.cell_index([5, 5]), 24);
    }

    #[test]
    fn build_shapes() {
        let p = GridScenario::default().build().unwrap();
        let sizes: Vec<usize> = p.subsystems.iter().map(|s| s.mdp.n_states()).collect();
        assert_eq!(sizes, vec![625, 15_625, 625]);
        for s in &p.subsystems {
            assert_eq!(s.component_costs.len(), 2);
            let w = s.weights().unwrap();
            assert_eq!(w, vec![0.5, 0.5]);
            let q_min = s
                .mdp
                .interior()
                .iter()
                .map(|&i| s.mdp.state_cost(i))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(q_min, 0.0);
            for h in &s.component_costs {
                assert_eq!(h.iter().filter(|v| **v == 0.0).count(), 1);
            }
        }
        assert_eq!(p.subsystems[0].mdp.boundary().len(), 9);
        assert_eq!(p.subsystems[1].mdp.boundary().len(), 27);
    }

    #[test]
    fn invalid_scenarios() {
        let mut g = GridScenario::default();
        g.initial[0] = [3, 2];
        assert!(g.validate().is_err());
        let mut g = GridScenario::default();
        g.composite[2] = [6, 1];
        assert!(g.validate().is_err());
        let g = GridScenario {
            obstacle_value: -1.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }
}
