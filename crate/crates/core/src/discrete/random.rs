//! Random small joint MDPs for property tests and the randomized
//! composition check.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;

use crate::graph::JointSpace;
use crate::Result;

use super::{DiscreteJointMdp, LocalKernel};

/// A component family on one random MDP: shared dynamics, state cost and
/// boundary, `F` terminal costs and targets, plus a composite target.
#[derive(Debug, Clone)]
pub struct RandomFamily {
    pub mdp: DiscreteJointMdp,
    /// `terminal_costs[f]` is indexed by boundary position.
    pub terminal_costs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub composite_target: Vec<f64>,
}

fn random_kernel(rng: &mut impl Rng, n: usize) -> LocalKernel {
    let rows = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=n.min(3));
            let mut support: Vec<usize> = sample(rng, n, k).into_vec();
            support.sort_unstable();
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            let mut row: Vec<(usize, f64)> = support.into_iter().zip(w.iter().map(|v| v / s)).collect();
            // absorb rounding so the row sums to one within the kernel tolerance
            let total: f64 = row.iter().map(|e| e.1).sum();
            row.last_mut().unwrap().1 += 1.0 - total;
            row
        })
        .collect();
    LocalKernel::new(rows).expect("random rows are stochastic")
}

/// Random product MDP with at most `max_states` joint states (at least 2),
/// `q` in `[0.05, 2]`, and a boundary reachable from every interior state.
pub fn random_mdp(rng: &mut impl Rng, max_states: usize) -> Result<DiscreteJointMdp> {
    assert!(
        max_states >= 2,
        "need room for one interior and one boundary state"
    );
    loop {
        let cards = if max_states >= 4 && rng.random_bool(0.5) {
            let a = rng.random_range(2..=(max_states / 2).min(7));
            let b = rng.random_range(2..=max_states / a);
            vec![a, b]
        } else {
            vec![rng.random_range(2..=max_states)]
        };
        let members: Vec<usize> = (1..=cards.len()).collect();
        let space = JointSpace::new(members, cards.clone())?;
        let kernels: Vec<LocalKernel> = cards.iter().map(|&c| random_kernel(rng, c)).collect();
        let n = space.len();

        let mut boundary: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        if !boundary.iter().any(|&b| b) {
            boundary[rng.random_range(0..n)] = true;
        }
        if boundary.iter().all(|&b| b) {
            continue;
        }
        // states that cannot reach the boundary under the passive dynamics
        // join it, so every interior state has finite cost-to-go
        let probe = DiscreteJointMdp::new(
            space.clone(),
            kernels.clone(),
            &boundary,
            &vec![0.0; n],
            vec![0.0; boundary.iter().filter(|&&b| b).count()],
        )?;
        let mut preds = vec![Vec::new(); n];
        for i in 0..n {
            if !probe.is_boundary(i) {
                for &(j, _) in probe.passive_row(i) {
                    preds[j].push(i);
                }
            }
        }
        let mut reach = boundary.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| boundary[i]).collect();
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !reach[i] {
                    reach[i] = true;
                    queue.push_back(i);
                }
            }
        }
        for i in 0..n {
            if !reach[i] {
                boundary[i] = true;
            }
        }
        if boundary.iter().all(|&b| b) {
            continue;
        }
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=2.0)).collect();
        let n_boundary = boundary.iter().filter(|&&b| b).count();
        return DiscreteJointMdp::new(space, kernels, &boundary, &q, vec![0.0; n_boundary]);
    }
}

/// Random family with `n_components` components: terminal costs in `[0, 5]`
/// and two-dimensional targets in `[0, 5]^2`.
pub fn random_family(rng: &mut impl Rng, max_states: usize, n_components: usize) -> Result<RandomFamily> {
    let mdp = random_mdp(rng, max_states)?;
    let nb = mdp.boundary().len();
    let terminal_costs: Vec<Vec<f64>> = (0..n_components)
        .map(|_| (0..nb).map(|_| rng.random_range(0.0..=5.0)).collect())
        .collect();
    let mut point = || vec![rng.random_range(0.0..=5.0), rng.random_range(0.0..=5.0)];
    let targets = (0..n_components).map(|_| point()).collect();
    let composite_target = point();
    let mdp = mdp.with_terminal_cost(terminal_costs[0].clone())?;
    Ok(RandomFamily {
        mdp,
        terminal_costs,
        targets,
        composite_target,
    })
}
