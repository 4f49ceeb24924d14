use serde::{Deserialize, Serialize};

use crate::math::log_sum_exp;
use crate::{Error, Result};

use super::model::DiffusionModel;
use super::rollout::{sample_passive_rollouts, PathCost, RolloutBatch, SamplingParams};

/// Monte Carlo estimate of `Z = E[exp(-S / lambda)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesirabilityEstimate {
    pub z: f64,
    pub log_z: f64,
    /// Standard error of `log_z` (delta method). Infinite for one rollout.
    pub log_z_se: f64,
    /// Standard error of `z`.
    pub z_se: f64,
}

/// Path-integral estimate of the optimal control at the batch's origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEstimate {
    pub control: Vec<f64>,
    /// Per-channel standard error of the self-normalised estimator.
    pub std_error: Vec<f64>,
    pub desirability: DesirabilityEstimate,
}

fn log_weights(path_costs: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if path_costs.is_empty() {
        return Err(Error::invalid("batch", "no rollouts"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    if let Some(k) = path_costs
        .iter()
        .position(|s| s.is_nan() || *s == f64::NEG_INFINITY)
    {
        return Err(Error::NonFinite(format!("path cost of rollout {k}")));
    }
    Ok(path_costs.iter().map(|s| -s / lambda).collect())
}

/// `Z ~ (1/n) sum_k exp(-S_k / lambda)`, accumulated in log space.
pub fn desirability_from_costs(path_costs: &[f64], lambda: f64) -> Result<DesirabilityEstimate> {
    let lw = log_weights(path_costs, lambda)?;
    let n = lw.len() as f64;
    let lse = log_sum_exp(&lw);
    if lse == f64::NEG_INFINITY {
        return Err(Error::Underflow(
            "every rollout weight vanished; check the cost scale against lambda".into(),
        ));
    }
    let log_z = lse - n.ln();
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let log_z_se = if lw.len() < 2 {
        f64::INFINITY
    } else {
        let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt() / mean
    };
    let z = log_z.exp();
    Ok(DesirabilityEstimate {
        z,
        log_z,
        log_z_se,
        z_se: z * log_z_se,
    })
}

pub fn pi_desirability(batch: &RolloutBatch, lambda: f64) -> Result<DesirabilityEstimate> {
    desirability_from_costs(&batch.path_costs, lambda)
}

/// Normalised rollout weights `softmax(-S / lambda)`.
pub fn rollout_weights(path_costs: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let lw = log_weights(path_costs, lambda)?;
    crate::math::softmax(&lw).ok_or_else(|| {
        Error::Underflow("every rollout weight vanished; check the cost scale against lambda".into())
    })
}

/// `u_c = sum_k w_k sigma_c dw0_kc / dt` with `w = softmax(-S / lambda)`,
/// for path costs `S` evaluated on `batch` (possibly under a different
/// terminal cost than the one it was sampled with).
pub fn control_from_costs(batch: &RolloutBatch, path_costs: &[f64]) -> Result<ControlEstimate> {
    if batch.horizon_steps == 0 {
        return Err(Error::invalid(
            "horizon_steps",
            "control estimation needs at least one step",
        ));
    }
    if path_costs.len() != batch.n_rollouts {
        return Err(Error::DimensionMismatch {
            what: "path costs",
            expected: batch.n_rollouts,
            got: path_costs.len(),
        });
    }
    let desirability = desirability_from_costs(path_costs, batch.lambda)?;
    let w = rollout_weights(path_costs, batch.lambda)?;
    let nu = batch.control_dim;
    let mut control = vec![0.0; nu];
    for (k, &wk) in w.iter().enumerate() {
        for (c, u) in control.iter_mut().enumerate() {
            *u += wk * batch.noise_scale[c] * batch.first_noise_of(k)[c] / batch.dt;
        }
    }
    let mut var = vec![0.0; nu];
    for (k, &wk) in w.iter().enumerate() {
        for c in 0..nu {
            let a = batch.noise_scale[c] * batch.first_noise_of(k)[c] / batch.dt;
            var[c] += wk * wk * (a - control[c]) * (a - control[c]);
        }
    }
    Ok(ControlEstimate {
        control,
        std_error: var.into_iter().map(f64::sqrt).collect(),
        desirability,
    })
}

/// Samples a passive batch at `(x, t)` and returns the path-integral control.
pub fn pi_optimal_control(
    model: &dyn DiffusionModel,
    cost: &dyn PathCost,
    x: &[f64],
    t: f64,
    params: &SamplingParams,
    seed: u64,
) -> Result<ControlEstimate> {
    let batch = sample_passive_rollouts(model, cost, x, t, params, seed)?;
    control_from_costs(&batch, &batch.path_costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::rollout::FnCost;
    use crate::continuous::{Brownian1d, UnicycleTeam};

    #[test]
    fn zero_cost_gives_unit_desirability() {
        let e = desirability_from_costs(&[0.0; 17], 1.0).unwrap();
        assert_eq!(e.z, 1.0);
        assert_eq!(e.log_z, 0.0);
        assert_eq!(e.log_z_se, 0.0);
    }

    #[test]
    fn large_costs_stay_representable() {
        let e = desirability_from_costs(&[5000.0, 5000.0], 1.0).unwrap();
        assert!((e.log_z + 5000.0).abs() < 1e-9);
        assert!(matches!(
            desirability_from_costs(&[], 1.0),
            Err(Error::InvalidArgument { .. })
        ));
    }

    #[test]
    fn single_rollout_control_is_its_noise() {
        let m = Brownian1d::new(0.7, 1.0).unwrap();
        let cost = FnCost {
            state: |_: &[f64], _: f64| 0.0,
            terminal: |x: &[f64]| x[0] * x[0],
        };
        let p = SamplingParams {
            n_rollouts: 1,
            horizon_steps: 5,
            dt: 0.1,
            ..Default::default()
        };
        let b = sample_passive_rollouts(&m, &cost, &[0.3], 0.0, &p, 8).unwrap();
        let u = control_from_costs(&b, &b.path_costs).unwrap();
        assert_eq!(u.control[0], 0.7 * b.first_noise[0] / 0.1);
        assert_eq!(u.std_error[0], 0.0);
    }

    #[test]
    fn equal_costs_give_near_zero_control() {
        let m = UnicycleTeam::uniform(1, 0.05, 0.025, 1.0).unwrap();
        let cost = FnCost {
            state: |_: &[f64], _: f64| 0.0,
            terminal: |_: &[f64]| 3.0,
        };
        let p = SamplingParams {
            n_rollouts: 2000,
            horizon_steps: 4,
            ..Default::default()
        };
        let u = pi_optimal_control(&m, &cost, &[0.0, 0.0, 0.3, 0.0], 0.0, &p, 1).unwrap();
        for c in 0..2 {
            assert!(u.control[c].abs() <= 4.0 * u.std_error[c], "{u:?}");
        }
    }
}
