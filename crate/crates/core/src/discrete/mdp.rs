use std::sync::Arc;

use crate::graph::JointSpace;
use crate::{Error, Execution, Result};

use super::kernel::product_row;
use super::LocalKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Interior(usize),
    Boundary(usize),
}

#[derive(Debug)]
struct Structure {
    space: JointSpace,
    kernels: Vec<LocalKernel>,
    slots: Vec<Slot>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    state_cost: Vec<f64>,
    row_ptr: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

/// First-exit joint MDP of a factorial subsystem.
///
/// Passive rows of interior states are the product of the members' local
/// kernels; boundary states are absorbing. The dynamics, interior/boundary
/// partition and state cost are shared behind an `Arc`, so the tasks of a
/// component family (which differ only in terminal cost) are cheap siblings
/// produced by [`DiscreteJointMdp::with_terminal_cost`].
#[derive(Debug, Clone)]
pub struct DiscreteJointMdp {
    structure: Arc<Structure>,
    terminal_cost: Arc<[f64]>,
}

impl DiscreteJointMdp {
    /// `is_boundary` and `state_cost` are indexed by joint state;
    /// `terminal_cost` by boundary position (see [`Self::boundary`]).
    /// `kernels[k]` belongs to member `k` of `space`.
    pub fn new(
        space: JointSpace,
        kernels: Vec<LocalKernel>,
        is_boundary: &[bool],
        state_cost: &[f64],
        terminal_cost: Vec<f64>,
    ) -> Result<Self> {
        let n = space.len();
        if kernels.len() != space.arity() {
            return Err(Error::DimensionMismatch {
                what: "per-member kernels",
                expected: space.arity(),
                got: kernels.len(),
            });
        }
        for (k, kernel) in kernels.iter().enumerate() {
            if kernel.n_states() != space.cards()[k] {
                return Err(Error::DimensionMismatch {
                    what: "kernel state count",
                    expected: space.cards()[k],
                    got: kernel.n_states(),
                });
            }
        }
        for (what, len) in [
            ("boundary flags", is_boundary.len()),
            ("state costs", state_cost.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }

        let mut slots = Vec::with_capacity(n);
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for (i, &b) in is_boundary.iter().enumerate() {
            if b {
                slots.push(Slot::Boundary(boundary.len()));
                boundary.push(i);
            } else {
                slots.push(Slot::Interior(interior.len()));
                interior.push(i);
            }
        }
        if interior.is_empty() {
            return Err(Error::invalid("boundary", "interior state set is empty"));
        }
        if boundary.is_empty() {
            return Err(Error::invalid("boundary", "boundary state set is empty"));
        }

        let mut q = vec![0.0; n];
        for &i in &interior {
            let c = state_cost[i];
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::invalid(
                    "state_cost",
                    format!("state cost {c} at interior state {i} must be finite and nonnegative"),
                ));
            }
            q[i] = c;
        }

        let rows = Execution::default().map(n, |i| match slots[i] {
            Slot::Boundary(_) => vec![(i, 1.0)],
            Slot::Interior(_) => {
                let mut locals = vec![0; space.arity()];
                space.unflatten_into(i, &mut locals).expect("index in range");
                let local_rows: Vec<&[(usize, f64)]> =
                    kernels.iter().zip(&locals).map(|(k, &x)| k.row(x)).collect();
                product_row(&local_rows, &space)
            }
        });
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut entries = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for row in rows {
            entries.extend(row);
            row_ptr.push(entries.len());
        }

        let structure = Arc::new(Structure {
            space,
            kernels,
            slots,
            interior,
            boundary,
            state_cost: q,
            row_ptr,
            entries,
        });
        Self::from_structure(structure, terminal_cost)
    }

    /// Convenience constructor from per-state closures over member-local
    /// states. `terminal_cost` is evaluated on boundary states only.
    pub fn from_fns(
        space: JointSpace,
        kernels: Vec<LocalKernel>,
        is_boundary: impl Fn(&[usize]) -> bool,
        state_cost: impl Fn(&[usize]) -> f64,
        terminal_cost: impl Fn(&[usize]) -> f64,
    ) -> Result<Self> {
        let n = space.len();
        let mut flags = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        let mut h = Vec::new();
        let mut locals = vec![0; space.arity()];
        for i in 0..n {
            space.unflatten_into(i, &mut locals)?;
            let b = is_boundary(&locals);
            flags.push(b);
            if b {
                q.push(0.0);
                h.push(terminal_cost(&locals));
            } else {
                q.push(state_cost(&locals));
            }
        }
        Self::new(space, kernels, &flags, &q, h)
    }

    fn from_structure(structure: Arc<Structure>, terminal_cost: Vec<f64>) -> Result<Self> {
        if terminal_cost.len() != structure.boundary.len() {
            return Err(Error::DimensionMismatch {
                what: "terminal costs",
                expected: structure.boundary.len(),
                got: terminal_cost.len(),
            });
        }
        if let Some(bad) = terminal_cost.iter().find(|h| !h.is_finite()) {
            return Err(Error::invalid(
                "terminal_cost",
                format!("terminal cost {bad} is not finite"),
            ));
        }
        Ok(Self {
            structure,
            terminal_cost: terminal_cost.into(),
        })
    }

    /// Sibling task sharing dynamics, state cost and partition.
    pub fn with_terminal_cost(&self, terminal_cost: Vec<f64>) -> Result<Self> {
        Self::from_structure(Arc::clone(&self.structure), terminal_cost)
    }

    /// Sibling task whose terminal cost is evaluated from member-local states.
    pub fn with_terminal_cost_fn(&self, h: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let space = &self.structure.space;
        let mut locals = vec![0; space.arity()];
        let mut costs = Vec::with_capacity(self.structure.boundary.len());
        for &b in &self.structure.boundary {
            space.unflatten_into(b, &mut locals)?;
            costs.push(h(&locals));
        }
        self.with_terminal_cost(costs)
    }

    /// True when both tasks share one dynamics/cost/partition structure.
    pub fn shares_structure(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.structure, &other.structure)
    }

    pub fn space(&self) -> &JointSpace {
        &self.structure.space
    }

    pub fn kernels(&self) -> &[LocalKernel] {
        &self.structure.kernels
    }

    pub fn n_states(&self) -> usize {
        self.structure.slots.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.structure.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.structure.boundary
    }

    pub fn is_boundary(&self, state: usize) -> bool {
        matches!(self.structure.slots[state], Slot::Boundary(_))
    }

    pub fn interior_position(&self, state: usize) -> Option<usize> {
        match self.structure.slots[state] {
            Slot::Interior(k) => Some(k),
            Slot::Boundary(_) => None,
        }
    }

    pub fn boundary_position(&self, state: usize) -> Option<usize> {
        match self.structure.slots[state] {
            Slot::Boundary(k) => Some(k),
            Slot::Interior(_) => None,
        }
    }

    /// `q(x)`; zero on boundary states.
    pub fn state_cost(&self, state: usize) -> f64 {
        self.structure.state_cost[state]
    }

    /// Terminal costs by boundary position.
    pub fn terminal_cost(&self) -> &[f64] {
        &self.terminal_cost
    }

    pub fn terminal_cost_at(&self, state: usize) -> Option<f64> {
        self.boundary_position(state).map(|k| self.terminal_cost[k])
    }

    /// Passive successor distribution of `state`, ascending by joint index.
    pub fn passive_row(&self, state: usize) -> &[(usize, f64)] {
        let s = &self.structure;
        &s.entries[s.row_ptr[state]..s.row_ptr[state + 1]]
    }

    pub fn n_transitions(&self) -> usize {
        self.structure.entries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> DiscreteJointMdp {
        // 3-state walk: 0 <-> 1 <-> 2, state 2 absorbing boundary.
        let k = LocalKernel::new(vec![
            vec![(0, 0.5), (1, 0.5)],
            vec![(0, 0.5), (2, 0.5)],
            vec![(1, 0.5), (2, 0.5)],
        ])
        .unwrap();
        let space = JointSpace::new(vec![1], vec![3]).unwrap();
        DiscreteJointMdp::new(space, vec![k], &[false, false, true], &[1.0, 1.0, 0.0], vec![0.0]).unwrap()
    }

    #[test]
    fn partition_and_absorbing_boundary() {
        let mdp = chain();
        assert_eq!(mdp.interior(), &[0, 1]);
        assert_eq!(mdp.boundary(), &[2]);
        assert_eq!(mdp.passive_row(2), &[(2, 1.0)]);
        assert_eq!(mdp.passive_row(1), &[(0, 0.5), (2, 0.5)]);
        assert_eq!(mdp.terminal_cost_at(2), Some(0.0));
        assert_eq!(mdp.terminal_cost_at(0), None);
    }

    #[test]
    fn siblings_share_structure() {
        let mdp = chain();
        let other = mdp.with_terminal_cost(vec![3.0]).unwrap();
        assert!(mdp.shares_structure(&other));
        assert_eq!(other.terminal_cost(), &[3.0]);
        assert!(mdp.with_terminal_cost(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = LocalKernel::grid_wind(1, 2);
        let space = JointSpace::new(vec![1], vec![2]).unwrap();
        let no_boundary = DiscreteJointMdp::new(
            space.clone(),
            vec![k.clone()],
            &[false, false],
            &[0.0, 0.0],
            vec![],
        );
        assert!(no_boundary.is_err());
        let no_interior = DiscreteJointMdp::new(
            space.clone(),
            vec![k.clone()],
            &[true, true],
            &[0.0, 0.0],
            vec![0.0, 0.0],
        );
        assert!(no_interior.is_err());
        let negative_q = DiscreteJointMdp::new(space, vec![k], &[false, true], &[-1.0, 0.0], vec![0.0]);
        assert!(negative_q.is_err());
    }

    #[test]
    fn every_row_is_stochastic() {
        let k = LocalKernel::grid_wind(3, 3);
        let space = JointSpace::new(vec![1, 2], vec![9, 9]).unwrap();
        let mdp = DiscreteJointMdp::from_fns(
            space,
            vec![k.clone(), k],
            |x| x[0] == 4 && x[1] == 4,
            |_| 1.0,
            |_| 0.0,
        )
        .unwrap();
        for i in 0..mdp.n_states() {
            let s: f64 = mdp.passive_row(i).iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
