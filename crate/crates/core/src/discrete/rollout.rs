use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::sample_sparse;
use crate::{Error, Result};

use super::{running_cost_discrete, DiscreteJointMdp, JointPolicy};

/// A sampled path through a joint MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrajectory {
    /// Visited joint states, starting with the initial state.
    pub states: Vec<usize>,
    /// `q(x_t) + KL(u(.|x_t) || p(.|x_t))` for each transition taken.
    pub step_costs: Vec<f64>,
    /// Terminal cost of the boundary state reached, if any.
    pub terminal_cost: Option<f64>,
    pub terminated: bool,
}

impl DiscreteTrajectory {
    pub fn len(&self) -> usize {
        self.step_costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step_costs.is_empty()
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("trajectory holds its initial state")
    }

    pub fn total_cost(&self) -> f64 {
        self.step_costs.iter().sum::<f64>() + self.terminal_cost.unwrap_or(0.0)
    }
}

/// Samples successors from `policy` until the boundary or `step_cap`
/// transitions. Draws are inverse-CDF over successors in joint-index order.
pub fn rollout_discrete(
    mdp: &DiscreteJointMdp,
    policy: &dyn JointPolicy,
    initial: usize,
    seed: u64,
    step_cap: usize,
) -> Result<DiscreteTrajectory> {
    if initial >= mdp.n_states() {
        return Err(Error::invalid("initial", format!("state {initial} out of range")));
    }
    if mdp.is_boundary(initial) {
        return Err(Error::NotInterior(initial));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = DiscreteTrajectory {
        states: vec![initial],
        step_costs: Vec::new(),
        terminal_cost: None,
        terminated: false,
    };
    let mut x = initial;
    for _ in 0..step_cap {
        let row = policy.row(x)?;
        traj.step_costs.push(running_cost_discrete(
            mdp.state_cost(x),
            &row,
            mdp.passive_row(x),
        )?);
        x = sample_sparse(&row, rng.random::<f64>());
        traj.states.push(x);
        if let Some(h) = mdp.terminal_cost_at(x) {
            traj.terminal_cost = Some(h);
            traj.terminated = true;
            break;
        }
    }
    Ok(traj)
}
