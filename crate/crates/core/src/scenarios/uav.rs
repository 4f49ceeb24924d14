//! Three unicycles on a path graph `1 - 2 - 3`, steered by path-integral
//! control towards planar targets.
//!
//! Agent states are `(x, y, v, phi)`; team states stack agents in order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::compose::{
    composite_control_from_batch, composite_terminal_cost, composition_weights, KernelSpec, TerminalFn,
};
use crate::continuous::{sample_passive_rollouts, DiffusionModel, FnCost, SamplingParams, UnicycleTeam};
use crate::graph::{factorize, AgentGraph, FactorialSubsystem};
use crate::math::mix_seed;
use crate::{Error, Result};

pub type AgentState = [f64; 4];

type BoxedTerminal<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>;

/// `(c, d, alpha)` of a linear terminal cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalParams {
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
}

impl Default for TerminalParams {
    fn default() -> Self {
        Self {
            c: 0.0,
            d: 2.0,
            alpha: 0.0,
        }
    }
}

/// `h = (d / 2)(|p - p_d| - c) + alpha` on planar positions.
pub fn linear_terminal_cost(params: &TerminalParams, position: [f64; 2], target: [f64; 2]) -> f64 {
    let dist = (position[0] - target[0]).hypot(position[1] - target[1]);
    0.5 * params.d * (dist - params.c) + params.alpha
}

/// A component task: one target per agent and its terminal-cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavTask {
    pub targets: Vec<AgentState>,
    #[serde(default)]
    pub cost: TerminalParams,
}

/// How the controller is executed on the team.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Re-estimate the control from the current noisy state.
    #[default]
    Receding,
    /// Estimate a control tape along the noise-free nominal path, then replay
    /// it open loop.
    Tape,
}

impl std::str::FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "receding" => Ok(Self::Receding),
            "tape" => Ok(Self::Tape),
            _ => Err(Error::Unknown {
                kind: "control mode",
                key: s.to_string(),
            }),
        }
    }
}

/// Parameters of a unicycle team experiment. Defaults are the second
/// built-in example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavScenario {
    pub initial: Vec<AgentState>,
    /// Speed noise level of every agent.
    pub sigma: f64,
    /// Heading noise level of every agent.
    pub nu: f64,
    pub lambda: f64,
    pub edges: Vec<(usize, usize)>,
    /// Weight of the distance-to-goal term of the running cost.
    pub goal_weight: f64,
    /// Weight of the inter-agent distance term of the running cost.
    pub pair_weight: f64,
    /// Goals used by the running cost. Empty means the centroid of the
    /// component targets of each agent.
    pub running_goals: Vec<[f64; 2]>,
    pub components: Vec<UavTask>,
    /// Composite target of each agent.
    pub composite: Vec<AgentState>,
    /// Isotropic kernel width over target positions.
    pub kernel_width: f64,
    pub acceptance_radius: f64,
    /// Step cap of a closed-loop episode.
    pub episode_steps: usize,
    /// An agent that enters the acceptance region of its target stops there
    /// and no longer acts; the episode ends once every agent has stopped.
    pub first_exit: bool,
    /// Number of simulation steps between control re-estimates.
    pub replan_every: usize,
}

impl Default for UavScenario {
    fn default() -> Self {
        Self::example2()
    }
}

impl UavScenario {
    /// Shared target `(30, 20)` with three terminal-cost parameter sets.
    pub fn example1() -> Self {
        let target = [30.0, 20.0, 0.0, 0.0];
        let task = |c, d, alpha| UavTask {
            targets: vec![target; 3],
            cost: TerminalParams { c, d, alpha },
        };
        Self {
            initial: vec![[5.0, 5.0, 0.3, 0.0], [5.0, 35.0, 0.3, 0.0], [5.0, 20.0, 0.3, 0.0]],
            components: vec![task(0.0, 2.0, 0.0), task(1.0, 2.0, 0.0), task(0.0, 4.0, 1.0)],
            composite: vec![target; 3],
            ..Self::example2()
        }
    }

    /// Component targets `(35, 28)` and `(35, 14)`, composite `(35, 20)`.
    pub fn example2() -> Self {
        let task = |y| UavTask {
            targets: vec![[35.0, y, 0.0, 0.0]; 3],
            cost: TerminalParams::default(),
        };
        Self {
            initial: vec![
                [10.0, 10.0, 0.3, 0.0],
                [10.0, 30.0, 0.3, 0.0],
                [10.0, 20.0, 0.3, 0.0],
            ],
            sigma: 0.05,
            nu: 0.025,
            lambda: 1.0,
            edges: vec![(1, 2), (2, 3)],
            goal_weight: 0.9,
            pair_weight: 1.5,
            running_goals: Vec::new(),
            components: vec![task(28.0), task(14.0)],
            composite: vec![[35.0, 20.0, 0.0, 0.0]; 3],
            kernel_width: 0.05,
            acceptance_radius: 3.0,
            episode_steps: 800,
            first_exit: true,
            replan_every: 5,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents() != 3 {
            return Err(Error::invalid(
                "initial",
                "the running costs are defined for three agents",
            ));
        }
        for (name, v) in [("sigma", self.sigma), ("nu", self.nu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and nonnegative"));
            }
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("kernel_width", self.kernel_width),
            ("acceptance_radius", self.acceptance_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("goal_weight", self.goal_weight),
            ("pair_weight", self.pair_weight),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.replan_every == 0 {
            return Err(Error::invalid("replan_every", "must be positive"));
        }
        if self.components.is_empty() {
            return Err(Error::invalid("components", "need at least one component task"));
        }
        for t in &self.components {
            if t.cost.d.is_nan() || t.cost.d < 0.0 {
                return Err(Error::invalid("d", "must be nonnegative"));
            }
        }
        let n = self.n_agents();
        let lists = self
            .components
            .iter()
            .map(|t| t.targets.len())
            .chain([self.composite.len()])
            .chain((!self.running_goals.is_empty()).then_some(self.running_goals.len()));
        for len in lists {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what: "targets per task",
                    expected: n,
                    got: len,
                });
            }
        }
        let finite = self
            .initial
            .iter()
            .chain(&self.composite)
            .chain(self.components.iter().flat_map(|t| &t.targets))
            .all(|s| s.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::invalid("initial", "states and targets must be finite"));
        }
        Ok(())
    }

    /// Goal of agent `agent` in the running cost.
    pub fn running_goal(&self, agent: usize) -> [f64; 2] {
        if let Some(g) = self.running_goals.get(agent - 1) {
            return *g;
        }
        let f = self.components.len() as f64;
        let sum = self.components.iter().fold([0.0, 0.0], |acc, t| {
            let p = t.targets[agent - 1];
            [acc[0] + p[0], acc[1] + p[1]]
        });
        [sum[0] / f, sum[1] / f]
    }

    pub fn build(&self) -> Result<UavProblem> {
        self.validate()?;
        let graph = AgentGraph::new(self.n_agents(), self.edges.iter().copied())?;
        let subsystems = factorize(&graph)?
            .into_iter()
            .map(|s| UavSubsystem::build(self, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(UavProblem {
            scenario: self.clone(),
            subsystems,
        })
    }
}

fn position(states: &[f64], k: usize) -> [f64; 2] {
    [states[4 * k], states[4 * k + 1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Running cost of one subsystem with its reference distances fixed at the
/// initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavRunningCost {
    pub goal_weight: f64,
    pub pair_weight: f64,
    /// Position of the central agent among the members.
    pub central: usize,
    pub goal: [f64; 2],
    /// Initial distance of the central agent to its goal.
    pub goal_reference: f64,
    /// Position of the paired member and the initial distance to it.
    pub pair: Option<(usize, f64)>,
}

impl UavRunningCost {
    /// Evaluates on the members' stacked states.
    pub fn eval(&self, states: &[f64]) -> f64 {
        let p = position(states, self.central);
        let mut q = self.goal_weight * (dist(p, self.goal) - self.goal_reference);
        if let Some((k, reference)) = self.pair {
            q += self.pair_weight * (dist(p, position(states, k)) - reference);
        }
        q
    }
}

/// One factorial subsystem of the unicycle team.
#[derive(Debug, Clone)]
pub struct UavSubsystem {
    pub subsystem: FactorialSubsystem,
    pub model: UnicycleTeam,
    pub running: UavRunningCost,
    /// Members' initial states, stacked.
    pub initial: Vec<f64>,
    /// `targets[f]`: members' target positions `(x, y, x, y, ...)` of task `f`.
    pub targets: Vec<Vec<f64>>,
    pub composite_target: Vec<f64>,
    pub costs: Vec<TerminalParams>,
    pub kernel: KernelSpec,
}

/// Running cost of the subsystem centred on `subsystem` at the members'
/// stacked states.
pub fn uav_running_cost(scenario: &UavScenario, subsystem: usize, states: &[f64]) -> Result<f64> {
    let graph = AgentGraph::new(scenario.n_agents(), scenario.edges.iter().copied())?;
    let s = factorize(&graph)?
        .into_iter()
        .find(|s| s.central() == subsystem)
        .ok_or_else(|| Error::Unknown {
            kind: "unicycle subsystem",
            key: subsystem.to_string(),
        })?;
    if states.len() != 4 * s.len() {
        return Err(Error::DimensionMismatch {
            what: "subsystem states",
            expected: 4 * s.len(),
            got: states.len(),
        });
    }
    Ok(running_cost_for(scenario, &s)?.eval(states))
}

fn running_cost_for(sc: &UavScenario, s: &FactorialSubsystem) -> Result<UavRunningCost> {
    let partner = match s.central() {
        1 => Some(2),
        2 => Some(1),
        3 => None,
        other => {
            return Err(Error::Unknown {
                kind: "unicycle subsystem",
                key: other.to_string(),
            })
        }
    };
    let at = |a: usize| [sc.initial[a - 1][0], sc.initial[a - 1][1]];
    let i = s.central();
    let goal = sc.running_goal(i);
    let pair = partner
        .map(|j| -> Result<(usize, f64)> { Ok((s.position(j)?, dist(at(i), at(j)))) })
        .transpose()?;
    Ok(UavRunningCost {
        goal_weight: sc.goal_weight,
        pair_weight: sc.pair_weight,
        central: s.central_position(),
        goal,
        goal_reference: dist(at(i), goal),
        pair,
    })
}

impl UavSubsystem {
    fn build(sc: &UavScenario, subsystem: FactorialSubsystem) -> Result<Self> {
        let members = subsystem.members().to_vec();
        let model = UnicycleTeam::uniform(members.len(), sc.sigma, sc.nu, sc.lambda)?;
        let running = running_cost_for(sc, &subsystem)?;
        let initial = members.iter().flat_map(|&a| sc.initial[a - 1]).collect();
        let planar = |states: &[AgentState]| -> Vec<f64> {
            members
                .iter()
                .flat_map(|&a| [states[a - 1][0], states[a - 1][1]])
                .collect()
        };
        Ok(Self {
            targets: sc.components.iter().map(|t| planar(&t.targets)).collect(),
            composite_target: planar(&sc.composite),
            costs: sc.components.iter().map(|t| t.cost).collect(),
            kernel: KernelSpec::isotropic(2 * members.len(), sc.kernel_width)?,
            subsystem,
            model,
            running,
            initial,
        })
    }

    pub fn n_components(&self) -> usize {
        self.targets.len()
    }

    /// Terminal cost of task `f`: the members' linear costs, summed.
    pub fn terminal_cost(&self, task: usize, states: &[f64]) -> f64 {
        let t = &self.targets[task];
        (0..self.subsystem.len())
            .map(|k| linear_terminal_cost(&self.costs[task], position(states, k), [t[2 * k], t[2 * k + 1]]))
            .sum()
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        composition_weights(&self.targets, &self.composite_target, &self.kernel)
    }

    /// Terminal cost of the composite task implied by `weights`.
    pub fn composite_terminal_cost(&self, weights: &[f64], states: &[f64]) -> Result<f64> {
        let h: Vec<f64> = (0..self.n_components())
            .map(|f| self.terminal_cost(f, states))
            .collect();
        composite_terminal_cost(weights, &h)
    }
}

/// Which task a closed-loop run pursues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UavTaskChoice {
    Component(usize),
    Composite,
}

/// A closed-loop team run. Step `k` covers `[k dt, (k + 1) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavRun {
    pub dt: f64,
    /// `states[k]`: team state at time `k dt`; one more entry than steps.
    pub states: Vec<Vec<f64>>,
    /// `controls[k]`: team control applied on step `k`.
    pub controls: Vec<Vec<f64>>,
    /// `costs[k][i]`: `(q_i + u_i^T R u_i / 2) dt` for agent `i + 1`'s
    /// subsystem on step `k`.
    pub costs: Vec<Vec<f64>>,
    /// `mixing[k][i]`: mixing weights of subsystem `i` used on step `k`.
    pub mixing: Vec<Vec<Vec<f64>>>,
    /// Terminal cost of each agent's subsystem at the final state.
    pub terminal_costs: Vec<f64>,
    /// Final distance of each agent to its target.
    pub final_distances: Vec<f64>,
    pub success: bool,
}

impl UavRun {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn total_cost(&self, agent_index: usize) -> f64 {
        self.costs.iter().map(|c| c[agent_index]).sum::<f64>() + self.terminal_costs[agent_index]
    }
}

/// The unicycle team split into its subsystems.
#[derive(Debug, Clone)]
pub struct UavProblem {
    pub scenario: UavScenario,
    pub subsystems: Vec<UavSubsystem>,
}

#[derive(Clone)]
struct Plan {
    control: Vec<f64>,
    mixing: Vec<Vec<f64>>,
}

impl UavProblem {
    pub fn initial_state(&self) -> Vec<f64> {
        self.scenario.initial.iter().flatten().copied().collect()
    }

    fn task_weights(&self, s: &UavSubsystem, task: UavTaskChoice) -> Result<(Vec<usize>, Vec<f64>)> {
        match task {
            UavTaskChoice::Composite => Ok(((0..s.n_components()).collect(), s.weights()?)),
            UavTaskChoice::Component(f) if f < s.n_components() => Ok((vec![f], vec![1.0])),
            UavTaskChoice::Component(f) => Err(Error::Unknown {
                kind: "component task",
                key: f.to_string(),
            }),
        }
    }

    fn gather(&self, s: &UavSubsystem, team: &[f64]) -> Vec<f64> {
        s.subsystem
            .members()
            .iter()
            .flat_map(|&a| team[4 * (a - 1)..4 * a].iter().copied())
            .collect()
    }

    /// Each agent's control from its own subsystem's estimate at `team`.
    fn plan(
        &self,
        team: &[f64],
        t: f64,
        task: UavTaskChoice,
        params: &SamplingParams,
        seed: u64,
        stopped: &[bool],
    ) -> Result<Plan> {
        let mut control = vec![0.0; 2 * self.subsystems.len()];
        let mut mixing = Vec::with_capacity(self.subsystems.len());
        for (i, s) in self.subsystems.iter().enumerate() {
            if stopped[s.subsystem.central() - 1] {
                mixing.push(Vec::new());
                continue;
            }
            let x = self.gather(s, team);
            let running = |y: &[f64], _: f64| s.running.eval(y);
            let cost = FnCost {
                state: running,
                terminal: |_: &[f64]| 0.0,
            };
            let batch = sample_passive_rollouts(&s.model, &cost, &x, t, params, mix_seed(seed, i as u64))?;
            let (tasks, weights) = self.task_weights(s, task)?;
            let fns: Vec<BoxedTerminal<'_>> = tasks
                .iter()
                .map(|&f| Box::new(move |y: &[f64]| s.terminal_cost(f, y)) as BoxedTerminal<'_>)
                .collect();
            let refs: Vec<TerminalFn<'_>> = fns.iter().map(|b| b.as_ref() as TerminalFn<'_>).collect();
            let out = composite_control_from_batch(&batch, &weights, &refs)?;
            let c = s.subsystem.central_position();
            let a = s.subsystem.central() - 1;
            control[2 * a..2 * a + 2].copy_from_slice(&out.control[2 * c..2 * c + 2]);
            mixing.push(out.mixing);
        }
        Ok(Plan { control, mixing })
    }

    fn task_targets(&self, task: UavTaskChoice) -> Result<Vec<[f64; 2]>> {
        let sc = &self.scenario;
        let states = match task {
            UavTaskChoice::Composite => &sc.composite,
            UavTaskChoice::Component(f) => {
                &sc.components
                    .get(f)
                    .ok_or_else(|| Error::Unknown {
                        kind: "component task",
                        key: f.to_string(),
                    })?
                    .targets
            }
        };
        Ok(states.iter().map(|s| [s[0], s[1]]).collect())
    }

    /// Stops agents that have entered the acceptance region.
    fn mark_arrivals(&self, x: &mut [f64], targets: &[[f64; 2]], stopped: &mut [bool]) {
        if !self.scenario.first_exit {
            return;
        }
        for (a, s) in stopped.iter_mut().enumerate() {
            if !*s && dist(position(x, a), targets[a]) <= self.scenario.acceptance_radius {
                *s = true;
                x[4 * a + 2] = 0.0;
            }
        }
    }

    /// One step of the team; stopped agents hold their state.
    fn advance(
        model: &UnicycleTeam,
        x: &[f64],
        control: &[f64],
        dt: f64,
        draws: &[f64],
        stopped: &[bool],
    ) -> Result<Vec<f64>> {
        let mut next = crate::continuous::euler_maruyama_step(model, x, control, dt, draws)?;
        for (a, _) in stopped.iter().enumerate().filter(|(_, s)| **s) {
            next[4 * a..4 * a + 4].copy_from_slice(&x[4 * a..4 * a + 4]);
        }
        Ok(next)
    }

    /// Runs the team with steps of length `params.dt` until every agent has
    /// stopped or `episode_steps` steps have passed.
    pub fn run(
        &self,
        task: UavTaskChoice,
        params: &SamplingParams,
        mode: ControlMode,
        seed: u64,
    ) -> Result<UavRun> {
        params.validate()?;
        let sc = &self.scenario;
        let n = self.subsystems.len();
        let team_model = UnicycleTeam::uniform(n, sc.sigma, sc.nu, sc.lambda)?;
        let penalty = team_model.control_penalty();
        let dt = params.dt;
        let targets = self.task_targets(task)?;
        let plan_seed = |k: usize| mix_seed(seed, k as u64);

        let tape = match mode {
            ControlMode::Receding => None,
            ControlMode::Tape => {
                let mut x = self.initial_state();
                let mut stopped = vec![false; n];
                self.mark_arrivals(&mut x, &targets, &mut stopped);
                let zeros = vec![0.0; team_model.control_dim()];
                let mut plans: Vec<Plan> = Vec::new();
                let mut current: Option<Plan> = None;
                for k in 0..sc.episode_steps {
                    if stopped.iter().all(|s| *s) {
                        break;
                    }
                    if k % sc.replan_every == 0 {
                        current = Some(self.plan(&x, k as f64 * dt, task, params, plan_seed(k), &stopped)?);
                    }
                    let p = current.as_ref().expect("planned on the first step");
                    x = Self::advance(&team_model, &x, &p.control, dt, &zeros, &stopped)?;
                    self.mark_arrivals(&mut x, &targets, &mut stopped);
                    plans.push(p.clone());
                }
                Some(plans)
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX));
        let mut x = self.initial_state();
        let mut stopped = vec![false; n];
        self.mark_arrivals(&mut x, &targets, &mut stopped);
        let mut run = UavRun {
            dt,
            states: vec![x.clone()],
            controls: Vec::new(),
            costs: Vec::new(),
            mixing: Vec::new(),
            terminal_costs: Vec::new(),
            final_distances: Vec::new(),
            success: false,
        };
        let idle = Plan {
            control: vec![0.0; team_model.control_dim()],
            mixing: vec![Vec::new(); n],
        };
        let mut current: Option<Plan> = None;
        let mut draws = vec![0.0; team_model.control_dim()];
        for k in 0..sc.episode_steps {
            if stopped.iter().all(|s| *s) {
                break;
            }
            let plan = match &tape {
                Some(plans) => plans.get(k).unwrap_or(&idle),
                None => {
                    if k % sc.replan_every == 0 {
                        current = Some(self.plan(&x, k as f64 * dt, task, params, plan_seed(k), &stopped)?);
                    }
                    current.as_ref().expect("planned on the first step")
                }
            };
            let mut control = plan.control.clone();
            let mut mixing = plan.mixing.clone();
            for (a, _) in stopped.iter().enumerate().filter(|(_, s)| **s) {
                control[2 * a..2 * a + 2].fill(0.0);
                mixing[a].clear();
            }
            let costs: Vec<f64> = self
                .subsystems
                .iter()
                .map(|s| {
                    let a = s.subsystem.central() - 1;
                    if stopped[a] {
                        return 0.0;
                    }
                    let effort: f64 = (0..2)
                        .map(|c| 0.5 * penalty[2 * a + c] * control[2 * a + c].powi(2))
                        .sum();
                    (s.running.eval(&self.gather(s, &x)) + effort) * dt
                })
                .collect();
            for d in draws.iter_mut() {
                *d = StandardNormal.sample(&mut rng);
            }
            x = Self::advance(&team_model, &x, &control, dt, &draws, &stopped)?;
            self.mark_arrivals(&mut x, &targets, &mut stopped);
            run.controls.push(control);
            run.mixing.push(mixing);
            run.costs.push(costs);
            run.states.push(x.clone());
        }

        run.final_distances = (0..n).map(|a| dist(position(&x, a), targets[a])).collect();
        run.success = run.final_distances.iter().all(|d| *d <= sc.acceptance_radius);
        run.terminal_costs = self
            .subsystems
            .iter()
            .map(|s| {
                let y = self.gather(s, &x);
                let (tasks, weights) = self.task_weights(s, task)?;
                let h: Vec<f64> = tasks.iter().map(|&f| s.terminal_cost(f, &y)).collect();
                composite_terminal_cost(&weights, &h)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(run)
    }
}
