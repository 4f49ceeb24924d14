//! Closed-loop execution of a whole team, one subsystem policy per agent.
//!
//! Agent `i` acts on the marginal of its own subsystem's joint policy,
//! evaluated at the current local states of that subsystem's members. All
//! agents move simultaneously. An agent whose subsystem sits on a boundary
//! state has finished its first-exit problem and holds its cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::sample_sparse;
use crate::{Error, Result};

use super::{marginal_local_policy, running_cost_discrete, DiscreteJointMdp, JointPolicy};

/// The subsystem centred on one agent and the policy driving it.
#[derive(Clone, Copy)]
pub struct TeamAgent<'a> {
    pub agent: usize,
    pub mdp: &'a DiscreteJointMdp,
    pub policy: &'a dyn JointPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamTrajectory {
    /// `locals[t][i]` is agent `i + 1`'s local state after `t` steps.
    pub locals: Vec<Vec<usize>>,
    /// `costs[t][i]`: running cost of agent `i + 1`'s subsystem on step `t`
    /// (zero once that subsystem is absorbed).
    pub costs: Vec<Vec<f64>>,
    /// Terminal cost of each agent's subsystem, once absorbed.
    pub terminal_costs: Vec<Option<f64>>,
    pub success: bool,
}

impl TeamTrajectory {
    pub fn steps(&self) -> usize {
        self.costs.len()
    }

    pub fn final_locals(&self) -> &[usize] {
        self.locals.last().expect("trajectory holds its initial state")
    }

    pub fn total_cost(&self, agent_index: usize) -> f64 {
        self.costs.iter().map(|c| c[agent_index]).sum::<f64>()
            + self.terminal_costs[agent_index].unwrap_or(0.0)
    }
}

fn subsystem_state(mdp: &DiscreteJointMdp, locals: &[usize], buf: &mut Vec<usize>) -> Result<usize> {
    buf.clear();
    buf.extend(mdp.space().members().iter().map(|&m| locals[m - 1]));
    mdp.space().flatten(buf)
}

/// Runs the team from `initial` (local state of agents `1..=n`) until
/// `is_success` holds, every subsystem is absorbed, or `step_cap` steps.
pub fn rollout_team(
    agents: &[TeamAgent<'_>],
    initial: &[usize],
    seed: u64,
    step_cap: usize,
    is_success: impl Fn(&[usize]) -> bool,
) -> Result<TeamTrajectory> {
    let n = initial.len();
    if agents.len() != n {
        return Err(Error::DimensionMismatch {
            what: "team agents",
            expected: n,
            got: agents.len(),
        });
    }
    for (k, a) in agents.iter().enumerate() {
        if a.agent != k + 1 {
            return Err(Error::invalid(
                "agents",
                "must be listed as agents 1..=n in order",
            ));
        }
        if let Some(&m) = a.mdp.space().members().iter().find(|&&m| m == 0 || m > n) {
            return Err(Error::NotAMember {
                agent: m,
                members: (1..=n).collect(),
            });
        }
        if a.mdp.space().position(a.agent).is_none() {
            return Err(Error::NotAMember {
                agent: a.agent,
                members: a.mdp.space().members().to_vec(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locals = initial.to_vec();
    let mut buf = Vec::new();
    let mut traj = TeamTrajectory {
        locals: vec![locals.clone()],
        costs: Vec::new(),
        terminal_costs: vec![None; n],
        success: is_success(&locals),
    };
    let absorb = |traj: &mut TeamTrajectory, locals: &[usize], buf: &mut Vec<usize>| -> Result<bool> {
        let mut all = true;
        for (k, a) in agents.iter().enumerate() {
            let s = subsystem_state(a.mdp, locals, buf)?;
            match a.mdp.terminal_cost_at(s) {
                Some(h) if traj.terminal_costs[k].is_none() => traj.terminal_costs[k] = Some(h),
                Some(_) => {}
                None => all = false,
            }
        }
        Ok(all)
    };
    let mut all_absorbed = absorb(&mut traj, &locals, &mut buf)?;

    while !traj.success && !all_absorbed && traj.costs.len() < step_cap {
        let mut next = locals.clone();
        let mut costs = vec![0.0; n];
        for (k, a) in agents.iter().enumerate() {
            // Draw even for absorbed agents so the stream layout does not
            // depend on who has finished.
            let u = rng.random::<f64>();
            if traj.terminal_costs[k].is_some() {
                continue;
            }
            let s = subsystem_state(a.mdp, &locals, &mut buf)?;
            let row = a.policy.row(s)?;
            costs[k] = running_cost_discrete(a.mdp.state_cost(s), &row, a.mdp.passive_row(s))?;
            let local = marginal_local_policy(&row, a.mdp.space(), a.agent)?;
            next[k] = sample_sparse(&local, u);
        }
        locals = next;
        traj.locals.push(locals.clone());
        traj.costs.push(costs);
        traj.success = is_success(&locals);
        all_absorbed = absorb(&mut traj, &locals, &mut buf)?;
    }
    Ok(traj)
}
