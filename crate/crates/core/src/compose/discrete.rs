use serde::{Deserialize, Serialize};

use crate::discrete::{
    log_expected_desirability, optimal_joint_policy, solve_desirability, DesirabilityTable, DiscreteJointMdp,
    JointPolicy, LinearSystem, SolveReport, SolverOptions, SparseRow,
};
use crate::math::{log_sum_exp, softmax};
use crate::{Error, Result};

use super::{check_weights, composite_terminal_costs};

/// A solved component task: its terminal cost (by boundary position) and
/// desirability table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteComponent {
    pub terminal_cost: Vec<f64>,
    pub table: DesirabilityTable,
    pub report: Option<SolveReport>,
}

impl DiscreteComponent {
    pub fn solve(system: &LinearSystem, terminal_cost: Vec<f64>, opts: &SolverOptions) -> Result<Self> {
        let (table, report) = solve_desirability(system, &terminal_cost, opts)?;
        Ok(Self {
            terminal_cost,
            table,
            report: Some(report),
        })
    }
}

fn check_tables(tables: &[&DesirabilityTable]) -> Result<usize> {
    let n = tables
        .first()
        .ok_or_else(|| Error::invalid("tables", "need at least one component"))?
        .len();
    if let Some(t) = tables.iter().find(|t| t.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "desirability table",
            expected: n,
            got: t.len(),
        });
    }
    Ok(n)
}

/// `Z = sum_f w_f Z_f`, pointwise in log space.
pub fn composite_desirability(weights: &[f64], tables: &[&DesirabilityTable]) -> Result<DesirabilityTable> {
    check_weights(weights, tables.len())?;
    let n = check_tables(tables)?;
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; tables.len()];
    let log_z = (0..n)
        .map(|i| {
            for (f, t) in tables.iter().enumerate() {
                terms[f] = log_w[f] + t.log_z_at(i);
            }
            log_sum_exp(&terms)
        })
        .collect();
    DesirabilityTable::from_log(log_z)
}

/// `W_f(x) ∝ w_f H_f(x)` with `H_f(x) = sum_x' p(x'|x) Z_f(x')`.
pub fn mixing_weights_discrete(
    mdp: &DiscreteJointMdp,
    weights: &[f64],
    tables: &[&DesirabilityTable],
    state: usize,
) -> Result<Vec<f64>> {
    check_weights(weights, tables.len())?;
    let log_mix: Vec<f64> = weights
        .iter()
        .zip(tables)
        .map(|(w, t)| w.ln() + log_expected_desirability(mdp, t, state))
        .collect();
    softmax(&log_mix).ok_or_else(|| {
        Error::Underflow(format!(
            "every component has zero desirability around state {state}"
        ))
    })
}

/// `u(.|x) = sum_f W_f(x) u_f(.|x)`.
pub fn composite_policy_discrete(
    mdp: &DiscreteJointMdp,
    weights: &[f64],
    tables: &[&DesirabilityTable],
    state: usize,
) -> Result<SparseRow> {
    if mdp.is_boundary(state) {
        return Err(Error::NotInterior(state));
    }
    let mix = mixing_weights_discrete(mdp, weights, tables, state)?;
    let mut row: SparseRow = mdp.passive_row(state).iter().map(|&(j, _)| (j, 0.0)).collect();
    for (t, &m) in tables.iter().zip(&mix) {
        if m == 0.0 {
            continue;
        }
        let u = optimal_joint_policy(mdp, t, state)?;
        for (r, (_, p)) in row.iter_mut().zip(u) {
            r.1 += m * p;
        }
    }
    Ok(row)
}

/// The composite controller as a [`JointPolicy`].
#[derive(Debug, Clone)]
pub struct CompositePolicy<'a> {
    pub mdp: &'a DiscreteJointMdp,
    pub weights: Vec<f64>,
    pub tables: Vec<&'a DesirabilityTable>,
}

impl JointPolicy for CompositePolicy<'_> {
    fn row(&self, state: usize) -> Result<SparseRow> {
        composite_policy_discrete(self.mdp, &self.weights, &self.tables, state)
    }
}

/// Gaps between the composed solution and a direct solve of the composite
/// task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_states: usize,
    pub n_components: usize,
    /// `max_x |Z_direct(x) - sum_f w_f Z_f(x)|`.
    pub max_z_gap: f64,
    /// `max_x |log Z_direct(x) - log sum_f w_f Z_f(x)|`.
    pub max_log_z_gap: f64,
    /// Largest total-variation distance between the composite policy and the
    /// directly derived optimal policy over interior states.
    pub max_tv_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub direct: SolveReport,
}

/// Solves the composite task directly, with terminal cost
/// `-log sum_f w_f exp(-h_f)`, and compares it with the composition of
/// `components`.
pub fn compare_composite_vs_direct(
    mdp: &DiscreteJointMdp,
    system: &LinearSystem,
    components: &[DiscreteComponent],
    weights: &[f64],
    opts: &SolverOptions,
    tolerance: f64,
) -> Result<ComparisonReport> {
    check_weights(weights, components.len())?;
    let costs: Vec<Vec<f64>> = components.iter().map(|c| c.terminal_cost.clone()).collect();
    let h = composite_terminal_costs(weights, &costs)?;
    let (direct, direct_report) = solve_desirability(system, &h, opts)?;
    let tables: Vec<&DesirabilityTable> = components.iter().map(|c| &c.table).collect();
    let composed = composite_desirability(weights, &tables)?;
    if composed.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch {
            what: "desirability table",
            expected: mdp.n_states(),
            got: composed.len(),
        });
    }

    let mut max_z_gap: f64 = 0.0;
    let mut max_log_z_gap: f64 = 0.0;
    for i in 0..mdp.n_states() {
        let (a, b) = (direct.log_z_at(i), composed.log_z_at(i));
        max_z_gap = max_z_gap.max((a.exp() - b.exp()).abs());
        if a != b {
            max_log_z_gap = max_log_z_gap.max((a - b).abs());
        }
    }

    let tv = opts.exec.try_map(mdp.interior().len(), |k| -> Result<f64> {
        let i = mdp.interior()[k];
        let c = composite_policy_discrete(mdp, weights, &tables, i)?;
        let d = optimal_joint_policy(mdp, &direct, i)?;
        Ok(0.5 * c.iter().zip(&d).map(|(x, y)| (x.1 - y.1).abs()).sum::<f64>())
    })?;
    let max_tv_gap = tv.into_iter().fold(0.0, f64::max);

    Ok(ComparisonReport {
        n_states: mdp.n_states(),
        n_components: components.len(),
        max_z_gap,
        max_log_z_gap,
        max_tv_gap,
        tolerance,
        pass: max_z_gap <= tolerance && max_tv_gap <= tolerance,
        direct: direct_report,
    })
}
