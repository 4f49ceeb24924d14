//! Composition of solved component tasks into controllers for new tasks.
//!
//! Components share dynamics, running cost and interior states and differ in
//! terminal cost. A new target `x_d` is scored against each component target
//! `x_d^f` with a squared-exponential kernel; with normalised weights `w`, the
//! task whose terminal cost is `-log sum_f w_f exp(-h_f)` has desirability
//! `sum_f w_f Z_f` and its optimal controller is a state-dependent mixture of
//! the component controllers.

mod continuous;
mod discrete;

pub use continuous::{
    composite_control_continuous, composite_control_from_batch, mix_controls, mixing_weights_continuous,
    CompositeControl, TerminalFn,
};
pub use discrete::{
    compare_composite_vs_direct, composite_desirability, composite_policy_discrete, mixing_weights_discrete,
    ComparisonReport, CompositePolicy, DiscreteComponent,
};

use serde::{Deserialize, Serialize};

use crate::math::{log_sum_exp, softmax};
use crate::{Error, Result};

/// Diagonal kernel-width matrix `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    widths: Vec<f64>,
}

impl KernelSpec {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::invalid("kernel", "needs at least one coordinate"));
        }
        if let Some(w) = widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("kernel", format!("width {w} is not positive")));
        }
        Ok(Self { widths })
    }

    /// `P = p I` on `dim` coordinates.
    pub fn isotropic(dim: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; dim])
    }

    pub fn dim(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// `-1/2 (a - b)^T P (a - b)`.
    pub fn log_kernel(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        for len in [a.len(), b.len()] {
            if len != self.dim() {
                return Err(Error::DimensionMismatch {
                    what: "kernel target",
                    expected: self.dim(),
                    got: len,
                });
            }
        }
        Ok(-0.5
            * a.iter()
                .zip(b)
                .zip(&self.widths)
                .map(|((x, y), p)| p * (x - y) * (x - y))
                .sum::<f64>())
    }
}

/// Unnormalised log weights `log w_f = -1/2 (x_d - x_d^f)^T P (x_d - x_d^f)`.
pub fn log_kernel_weights(targets: &[Vec<f64>], new_target: &[f64], kernel: &KernelSpec) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::invalid("targets", "need at least one component"));
    }
    targets.iter().map(|t| kernel.log_kernel(new_target, t)).collect()
}

/// Normalised kernel weights over component targets.
pub fn composition_weights(
    targets: &[Vec<f64>],
    new_target: &[f64],
    kernel: &KernelSpec,
) -> Result<Vec<f64>> {
    let lw = log_kernel_weights(targets, new_target, kernel)?;
    Ok(softmax(&lw).expect("finite kernel values"))
}

/// Normalises arbitrary positive weights.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() || raw.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("weights", "need finite nonnegative weights"));
    }
    let lw: Vec<f64> = raw.iter().map(|w| w.ln()).collect();
    softmax(&lw).ok_or_else(|| Error::invalid("weights", "all weights are zero"))
}

pub(crate) fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            what: "composition weights",
            expected: n,
            got: weights.len(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("weights", "need at least one component"));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("weights", "must be finite and nonnegative"));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights", format!("sum to {s}, not 1")));
    }
    Ok(())
}

/// `h = -log sum_f w_f exp(-h_f)` at one state.
pub fn composite_terminal_cost(weights: &[f64], costs: &[f64]) -> Result<f64> {
    check_weights(weights, costs.len())?;
    let terms: Vec<f64> = weights.iter().zip(costs).map(|(w, h)| w.ln() - h).collect();
    Ok(-log_sum_exp(&terms))
}

/// [`composite_terminal_cost`] over every boundary state; `costs[f][b]`.
pub fn composite_terminal_costs(weights: &[f64], costs: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_weights(weights, costs.len())?;
    let nb = costs[0].len();
    if let Some(c) = costs.iter().find(|c| c.len() != nb) {
        return Err(Error::DimensionMismatch {
            what: "component terminal costs",
            expected: nb,
            got: c.len(),
        });
    }
    (0..nb)
        .map(|b| {
            let at: Vec<f64> = costs.iter().map(|c| c[b]).collect();
            composite_terminal_cost(weights, &at)
        })
        .collect()
}

/// Index of the first largest entry.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Component tasks of one subsystem with their targets and kernel.
#[derive(Debug, Clone)]
pub struct ComponentLibrary<T> {
    kernel: KernelSpec,
    targets: Vec<Vec<f64>>,
    components: Vec<T>,
}

impl<T> ComponentLibrary<T> {
    pub fn new(kernel: KernelSpec, entries: Vec<(Vec<f64>, T)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("components", "need at least one component"));
        }
        let (targets, components): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        if let Some(t) = targets.iter().find(|t| t.len() != kernel.dim()) {
            return Err(Error::DimensionMismatch {
                what: "component target",
                expected: kernel.dim(),
                got: t.len(),
            });
        }
        Ok(Self {
            kernel,
            targets,
            components,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    pub fn weights_for(&self, new_target: &[f64]) -> Result<Vec<f64>> {
        composition_weights(&self.targets, new_target, &self.kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let k = KernelSpec::isotropic(2, 0.05).unwrap();
        assert_eq!(
            composition_weights(&[vec![1.0, 2.0]], &[1.0, 2.0], &k).unwrap(),
            vec![1.0]
        );

        let two = [vec![35.0, 28.0], vec![35.0, 14.0]];
        assert_eq!(
            composition_weights(&two, &[35.0, 21.0], &k).unwrap(),
            vec![0.5, 0.5]
        );

        let id = KernelSpec::isotropic(2, 1.0).unwrap();
        let w = composition_weights(&[vec![1.0, 0.0], vec![0.0, 0.0]], &[0.0, 0.0], &id).unwrap();
        let e = (-0.5f64).exp();
        assert!((w[0] - e / (1.0 + e)).abs() < 1e-15);
        assert!((w[0] - 0.3775).abs() < 1e-4 && (w[1] - 0.6225).abs() < 1e-4);

        assert!(composition_weights(&[vec![1.0]], &[1.0, 2.0], &k).is_err());
        assert!(KernelSpec::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn terminal_cost_examples() {
        assert_eq!(composite_terminal_cost(&[1.0], &[3.7]).unwrap(), 3.7);
        assert!((composite_terminal_cost(&[0.3, 0.7], &[2.0, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        let h = composite_terminal_cost(&[0.5, 0.5], &[0.0, 50.0]).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(composite_terminal_cost(&[0.5, 0.6], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn normalisation() {
        let w = normalize_weights(&[2.0, 6.0]).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15);
        assert!(normalize_weights(&[0.0, 0.0]).is_err());
    }
}
