use serde::{Deserialize, Serialize};

use crate::{Error, Execution, Result};

use super::linear::{LinearSystem, SparseMatrix};
use super::DiscreteJointMdp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the largest relative change of an interior value is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            exec: Execution::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `max |Z_I - (M Z_I + N Z_B)|` at the returned solution.
    pub residual: f64,
    /// Largest relative change of an interior value in the final sweep.
    pub change: f64,
}

/// Desirability `Z = exp(-V)` over every joint state, stored as `log Z`
/// because obstacle costs push `Z` far below the smallest normal `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesirabilityTable {
    log_z: Vec<f64>,
}

impl DesirabilityTable {
    pub fn from_log(log_z: Vec<f64>) -> Result<Self> {
        if let Some(i) = log_z.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite(format!("log desirability at state {i}")));
        }
        Ok(Self { log_z })
    }

    pub fn len(&self) -> usize {
        self.log_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_z.is_empty()
    }

    pub fn log_z(&self) -> &[f64] {
        &self.log_z
    }

    pub fn log_z_at(&self, state: usize) -> f64 {
        self.log_z[state]
    }

    /// `Z(x)`; may round to zero where `log Z` is very negative.
    pub fn z(&self, state: usize) -> f64 {
        self.log_z[state].exp()
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_z.iter().map(|v| v.exp()).collect()
    }

    /// `V = -log Z`.
    pub fn value(&self, state: usize) -> f64 {
        -self.log_z[state]
    }
}

/// Splits the MDP into interior and boundary blocks.
pub fn build_linear_system(mdp: &DiscreteJointMdp) -> LinearSystem {
    let n = mdp.n_states();
    let interior = mdp.interior().to_vec();
    let boundary = mdp.boundary().to_vec();
    let log_decay: Vec<f64> = interior.iter().map(|&i| -mdp.state_cost(i)).collect();

    let mut ii_rows = Vec::with_capacity(interior.len());
    let mut ib_rows = Vec::with_capacity(interior.len());
    for &i in &interior {
        let mut ii = Vec::new();
        let mut ib = Vec::new();
        for &(j, p) in mdp.passive_row(i) {
            match mdp.interior_position(j) {
                Some(k) => ii.push((k, p)),
                None => ib.push((mdp.boundary_position(j).expect("partition"), p)),
            }
        }
        ii_rows.push(ii);
        ib_rows.push(ib);
    }
    LinearSystem {
        n_states: n,
        p_ii: SparseMatrix::from_rows(interior.len(), ii_rows),
        p_ib: SparseMatrix::from_rows(boundary.len(), ib_rows),
        interior,
        boundary,
        log_decay,
    }
}

/// Solves `Z_I = M Z_I + N Z_B` with `Z_B = exp(-h)` by fixed-point
/// iteration, where `h` is indexed by boundary position.
///
/// The iteration runs on `Y = Z_I exp(q_I) exp(-s)` with `s = max(-h)`,
/// i.e. `Y = P_II diag(exp(-q_I)) Y + P_IB Z_B exp(-s)`, which keeps the
/// iterate of order one even when `exp(-q)` underflows. The table is
/// assembled as `log Z_I = -q_I + log Y + s`.
pub fn solve_desirability(
    system: &LinearSystem,
    terminal_cost: &[f64],
    opts: &SolverOptions,
) -> Result<(DesirabilityTable, SolveReport)> {
    if terminal_cost.len() != system.n_boundary() {
        return Err(Error::DimensionMismatch {
            what: "terminal costs",
            expected: system.n_boundary(),
            got: terminal_cost.len(),
        });
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if let Some(h) = terminal_cost.iter().find(|h| !h.is_finite()) {
        return Err(Error::NonFinite(format!("terminal cost {h}")));
    }
    let shift = terminal_cost.iter().map(|h| -h).fold(f64::NEG_INFINITY, f64::max);
    let z_b: Vec<f64> = terminal_cost.iter().map(|h| (-h - shift).exp()).collect();
    let b = system.p_ib.mul_vec(&z_b, opts.exec);

    let m = system.n_interior();
    let decay: Vec<f64> = system.log_decay.iter().map(|v| v.exp()).collect();
    let mut y = b.clone();
    let mut w = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        for ((wi, &yi), &d) in w.iter_mut().zip(&y).zip(&decay) {
            *wi = yi * d;
        }
        opts.exec.fill(&mut next, |i| system.p_ii.row_dot(i, &w) + b[i]);
        change = next
            .iter()
            .zip(&y)
            .map(|(&a, &o)| {
                if a == o {
                    0.0
                } else {
                    (a - o).abs() / a.abs().max(o.abs())
                }
            })
            .fold(0.0, f64::max);
        std::mem::swap(&mut y, &mut next);
        if change <= opts.tol {
            break;
        }
    }
    if change > opts.tol {
        return Err(Error::NotConverged { iterations, change });
    }
    if let Some(k) = y.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::Underflow(format!(
            "desirability of interior state {} is zero; the boundary is unreachable at this precision",
            system.interior[k]
        )));
    }

    let mut log_z = vec![0.0; system.n_states];
    for (k, &i) in system.interior.iter().enumerate() {
        log_z[i] = system.log_decay[k] + y[k].ln() + shift;
    }
    for (k, &i) in system.boundary.iter().enumerate() {
        log_z[i] = -terminal_cost[k];
    }
    let table = DesirabilityTable::from_log(log_z)?;
    let residual = bellman_residual(system, &table, terminal_cost, opts.exec);
    Ok((
        table,
        SolveReport {
            iterations,
            residual,
            change,
        },
    ))
}

/// `max_i |Z_i - (M Z_I + N Z_B)_i|` over interior states.
pub(crate) fn bellman_residual(
    system: &LinearSystem,
    table: &DesirabilityTable,
    terminal_cost: &[f64],
    exec: Execution,
) -> f64 {
    let z_i: Vec<f64> = system.interior.iter().map(|&i| table.z(i)).collect();
    let z_b: Vec<f64> = terminal_cost.iter().map(|h| (-h).exp()).collect();
    let r = exec.map(system.n_interior(), |i| {
        let rhs = system.p_ii.row_dot(i, &z_i) + system.p_ib.row_dot(i, &z_b);
        (z_i[i] - system.log_decay[i].exp() * rhs).abs()
    });
    r.into_iter().fold(0.0, f64::max)
}

/// Solves the MDP's own terminal cost.
pub fn solve_mdp(mdp: &DiscreteJointMdp, opts: &SolverOptions) -> Result<(DesirabilityTable, SolveReport)> {
    solve_desirability(&build_linear_system(mdp), mdp.terminal_cost(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::LocalKernel;
    use crate::graph::JointSpace;

    fn scalar() -> DiscreteJointMdp {
        let k = LocalKernel::new(vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]]).unwrap();
        let space = JointSpace::new(vec![1], vec![2]).unwrap();
        DiscreteJointMdp::new(space, vec![k], &[false, true], &[1.0, 0.0], vec![0.0]).unwrap()
    }

    #[test]
    fn scalar_matrices_and_fixed_point() {
        let mdp = scalar();
        let sys = build_linear_system(&mdp);
        let a = 0.5 * (-1.0f64).exp();
        assert!((sys.m().get(0, 0) - a).abs() < 1e-15);
        assert!((sys.n().get(0, 0) - a).abs() < 1e-15);

        let (z, report) = solve_mdp(&mdp, &SolverOptions::default()).unwrap();
        let expected = a / (1.0 - a);
        assert!((z.z(0) - expected).abs() < 1e-12, "{}", z.z(0));
        assert!((z.z(0) - 0.2254).abs() < 1e-4);
        assert_eq!(z.z(1), 1.0);
        assert!(report.residual <= 1e-12);
    }

    #[test]
    fn zero_costs_give_unit_desirability() {
        let k = LocalKernel::grid_wind(3, 3);
        let space = JointSpace::new(vec![1], vec![9]).unwrap();
        let mdp =
            DiscreteJointMdp::from_fns(space, vec![k], |x| x[0] == 0 || x[0] == 8, |_| 0.0, |_| 0.0).unwrap();
        let sys = build_linear_system(&mdp);
        for i in 0..sys.n_interior() {
            for (j, v) in sys.m().row(i) {
                assert_eq!(
                    v,
                    mdp.passive_row(mdp.interior()[i])
                        .iter()
                        .find(|e| e.0 == mdp.interior()[j])
                        .unwrap()
                        .1
                );
            }
        }
        let (z, _) = solve_desirability(&sys, mdp.terminal_cost(), &SolverOptions::default()).unwrap();
        for i in 0..mdp.n_states() {
            assert!((z.z(i) - 1.0).abs() < 1e-11, "state {i}: {}", z.z(i));
        }
    }

    #[test]
    fn boundary_values_are_exact() {
        let mdp = scalar().with_terminal_cost(vec![2.5]).unwrap();
        let (z, _) = solve_mdp(&mdp, &SolverOptions::default()).unwrap();
        assert_eq!(z.value(1), 2.5);
    }

    #[test]
    fn survives_huge_state_costs() {
        let k = LocalKernel::new(vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]]).unwrap();
        let space = JointSpace::new(vec![1], vec![2]).unwrap();
        let mdp = DiscreteJointMdp::new(space, vec![k], &[false, true], &[2000.0, 0.0], vec![0.0]).unwrap();
        let (z, _) = solve_mdp(&mdp, &SolverOptions::default()).unwrap();
        assert!((z.log_z_at(0) - (-2000.0 + 0.5f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let mdp = scalar();
        let err = solve_mdp(&mdp, &SolverOptions::default().with_max_iter(2)).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 2, .. }));
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let k = LocalKernel::grid_wind(3, 3);
        let space = JointSpace::new(vec![1, 2], vec![9, 9]).unwrap();
        let mdp = DiscreteJointMdp::from_fns(
            space,
            vec![k.clone(), k],
            |x| x[0] == 8 && x[1] == 8,
            |x| 0.1 + x[0] as f64 * 0.05,
            |_| 0.0,
        )
        .unwrap();
        let seq = solve_mdp(&mdp, &SolverOptions::default().with_exec(Execution::Sequential)).unwrap();
        let par = solve_mdp(&mdp, &SolverOptions::default().with_exec(Execution::Parallel)).unwrap();
        assert_eq!(seq, par);
    }
}
