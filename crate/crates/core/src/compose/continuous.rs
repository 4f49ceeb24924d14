use serde::{Deserialize, Serialize};

use crate::continuous::{
    control_from_costs, sample_passive_rollouts, ControlEstimate, DiffusionModel, FnCost, RolloutBatch,
    SamplingParams,
};
use crate::math::softmax;
use crate::{Error, Result};

use super::{argmax, check_weights};

/// Terminal cost of one continuous component.
pub type TerminalFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeControl {
    pub control: Vec<f64>,
    /// `W_f(x, t) ∝ w_f Z_f(x, t)`.
    pub mixing: Vec<f64>,
    pub components: Vec<ControlEstimate>,
}

/// `W_f ∝ w_f Z_f` from log desirabilities.
pub fn mixing_weights_continuous(weights: &[f64], log_z: &[f64]) -> Result<Vec<f64>> {
    check_weights(weights, log_z.len())?;
    let lw: Vec<f64> = weights.iter().zip(log_z).map(|(w, z)| w.ln() + z).collect();
    softmax(&lw).ok_or_else(|| Error::Underflow("every component desirability vanished".into()))
}

/// `sum_f W_f u_f`, written as `u_a + sum_{f != a} W_f (u_f - u_a)` around
/// the heaviest component `a`. The two forms agree in exact arithmetic; the
/// anchored one returns `u_a` bit for bit when there is a single component
/// or all components coincide.
pub fn mix_controls(mixing: &[f64], controls: &[&[f64]]) -> Vec<f64> {
    let a = argmax(mixing);
    let mut u = controls[a].to_vec();
    for (f, (&m, uf)) in mixing.iter().zip(controls).enumerate() {
        if f == a || m == 0.0 {
            continue;
        }
        for (c, x) in u.iter_mut().enumerate() {
            *x += m * (uf[c] - controls[a][c]);
        }
    }
    u
}

/// Composite control from one shared passive batch, re-costed under each
/// component's terminal cost.
pub fn composite_control_from_batch(
    batch: &RolloutBatch,
    weights: &[f64],
    terminals: &[TerminalFn<'_>],
) -> Result<CompositeControl> {
    check_weights(weights, terminals.len())?;
    let components = terminals
        .iter()
        .map(|h| {
            let costs = batch.path_costs_with(h)?;
            control_from_costs(batch, &costs)
        })
        .collect::<Result<Vec<_>>>()?;
    let log_z: Vec<f64> = components.iter().map(|c| c.desirability.log_z).collect();
    let mixing = mixing_weights_continuous(weights, &log_z)?;
    let controls: Vec<&[f64]> = components.iter().map(|c| c.control.as_slice()).collect();
    Ok(CompositeControl {
        control: mix_controls(&mixing, &controls),
        mixing,
        components,
    })
}

/// Samples one passive batch at `(x, t)` under the shared running cost and
/// composes the component controls.
#[allow(clippy::too_many_arguments)]
pub fn composite_control_continuous(
    model: &dyn DiffusionModel,
    running: &(dyn Fn(&[f64], f64) -> f64 + Sync),
    terminals: &[TerminalFn<'_>],
    weights: &[f64],
    x: &[f64],
    t: f64,
    params: &SamplingParams,
    seed: u64,
) -> Result<CompositeControl> {
    let cost = FnCost {
        state: running,
        terminal: |_: &[f64]| 0.0,
    };
    let batch = sample_passive_rollouts(model, &cost, x, t, params, seed)?;
    composite_control_from_batch(&batch, weights, terminals)
}
