use crate::graph::JointSpace;
use crate::{Error, Result};

use super::{DesirabilityTable, DiscreteJointMdp, SparseRow};

/// Source of joint next-state distributions, one row per joint state.
pub trait JointPolicy: Send + Sync {
    fn row(&self, state: usize) -> Result<SparseRow>;
}

impl<F> JointPolicy for F
where
    F: Fn(usize) -> Result<SparseRow> + Send + Sync,
{
    fn row(&self, state: usize) -> Result<SparseRow> {
        self(state)
    }
}

/// `u*(x'|x) ∝ p(x'|x) Z(x')` for a solved task.
#[derive(Debug, Clone, Copy)]
pub struct OptimalPolicy<'a> {
    pub mdp: &'a DiscreteJointMdp,
    pub table: &'a DesirabilityTable,
}

impl JointPolicy for OptimalPolicy<'_> {
    fn row(&self, state: usize) -> Result<SparseRow> {
        optimal_joint_policy(self.mdp, self.table, state)
    }
}

/// Successor weights `p(x'|x) Z(x') / Z_max` with `Z_max` the largest
/// successor desirability, and `log Z_max`.
fn scaled_successors(mdp: &DiscreteJointMdp, table: &DesirabilityTable, state: usize) -> (Vec<f64>, f64) {
    let row = mdp.passive_row(state);
    let top = row
        .iter()
        .map(|&(j, _)| table.log_z_at(j))
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (vec![0.0; row.len()], top);
    }
    let w = row
        .iter()
        .map(|&(j, p)| p * (table.log_z_at(j) - top).exp())
        .collect();
    (w, top)
}

/// `log H(x) = log sum_x' p(x'|x) Z(x')`.
pub fn log_expected_desirability(mdp: &DiscreteJointMdp, table: &DesirabilityTable, state: usize) -> f64 {
    let (w, top) = scaled_successors(mdp, table, state);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + w.iter().sum::<f64>().ln()
}

/// Optimal joint policy row at an interior state. Successor desirabilities
/// are rescaled by their maximum before normalising, so rows stay exact when
/// `Z` itself underflows.
pub fn optimal_joint_policy(
    mdp: &DiscreteJointMdp,
    table: &DesirabilityTable,
    state: usize,
) -> Result<SparseRow> {
    if table.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch {
            what: "desirability table",
            expected: mdp.n_states(),
            got: table.len(),
        });
    }
    if mdp.is_boundary(state) {
        return Err(Error::NotInterior(state));
    }
    let (w, top) = scaled_successors(mdp, table, state);
    if top == f64::NEG_INFINITY {
        return Err(Error::Underflow(format!(
            "every successor of state {state} has zero desirability"
        )));
    }
    let total: f64 = w.iter().sum();
    Ok(mdp
        .passive_row(state)
        .iter()
        .zip(&w)
        .map(|(&(j, _), &wj)| (j, wj / total))
        .collect())
}

/// Marginal of a joint next-state row over one member's next local state.
pub fn marginal_local_policy(row: &[(usize, f64)], space: &JointSpace, agent: usize) -> Result<SparseRow> {
    let pos = space.position(agent).ok_or_else(|| Error::NotAMember {
        agent,
        members: space.members().to_vec(),
    })?;
    let mut dense = vec![0.0; space.cards()[pos]];
    for &(j, p) in row {
        if j >= space.len() {
            return Err(Error::invalid("row", format!("joint index {j} out of range")));
        }
        dense[space.component(j, pos)] += p;
    }
    Ok(dense.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect())
}

/// `KL(u || p)` for sorted sparse rows, with `0 log 0 = 0`. Mass of `u` outside
/// the support of `p` is an error (the cost would be infinite).
pub fn kl_divergence(u: &[(usize, f64)], p: &[(usize, f64)]) -> Result<f64> {
    let mut kl = 0.0;
    for &(j, uj) in u {
        if uj <= 0.0 {
            continue;
        }
        let pj = p.binary_search_by_key(&j, |e| e.0).map(|k| p[k].1).unwrap_or(0.0);
        if pj <= 0.0 {
            return Err(Error::NotAbsolutelyContinuous(j));
        }
        kl += uj * (uj / pj).ln();
    }
    Ok(kl)
}

/// `q + KL(u || p)` on joint rows.
pub fn running_cost_discrete(q: f64, u: &[(usize, f64)], p: &[(usize, f64)]) -> Result<f64> {
    Ok(q + kl_divergence(u, p)?)
}

/// A controlled row and the passive row it is compared with.
pub type RowPair<'a> = (&'a [(usize, f64)], &'a [(usize, f64)]);

/// `q + sum_j KL(u_j || p_j)` over per-agent `(u_j, p_j)` rows.
pub fn running_cost_factored(q: f64, rows: &[RowPair<'_>]) -> Result<f64> {
    let mut cost = q;
    for (u, p) in rows {
        cost += kl_divergence(u, p)?;
    }
    Ok(cost)
}
