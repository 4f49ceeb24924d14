use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Execution, Result};

use super::model::{step_into, DiffusionModel};

/// State and terminal costs of a continuous task.
pub trait PathCost: Sync {
    fn state_cost(&self, x: &[f64], t: f64) -> f64;

    fn terminal_cost(&self, x: &[f64]) -> f64;
}

/// [`PathCost`] assembled from two closures.
pub struct FnCost<Q, H> {
    pub state: Q,
    pub terminal: H,
}

impl<Q, H> PathCost for FnCost<Q, H>
where
    Q: Fn(&[f64], f64) -> f64 + Sync,
    H: Fn(&[f64]) -> f64 + Sync,
{
    fn state_cost(&self, x: &[f64], t: f64) -> f64 {
        (self.state)(x, t)
    }

    fn terminal_cost(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    pub n_rollouts: usize,
    pub dt: f64,
    pub horizon_steps: usize,
    /// Keep every visited state of every rollout.
    pub record_paths: bool,
    pub exec: Execution,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            n_rollouts: 1000,
            dt: 0.05,
            horizon_steps: 100,
            record_paths: false,
            exec: Execution::default(),
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rollouts == 0 {
            return Err(Error::invalid("n_rollouts", "need at least one rollout"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        Ok(())
    }
}

/// Passive rollouts from a common initial state and time grid.
///
/// Components of a composite task share dynamics and running cost, so one
/// batch serves all of them: [`RolloutBatch::path_costs_with`] swaps in a
/// different terminal cost without resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_rollouts: usize,
    pub dt: f64,
    pub horizon_steps: usize,
    pub t0: f64,
    pub initial_state: Vec<f64>,
    pub state_dim: usize,
    pub control_dim: usize,
    pub noise_scale: Vec<f64>,
    pub lambda: f64,
    /// `sum_t q(x_t, t) dt` per rollout (left-endpoint rule).
    pub running_costs: Vec<f64>,
    /// Row-major `n_rollouts x state_dim`.
    pub final_states: Vec<f64>,
    /// First-interval Brownian increments `dw_0 = sqrt(dt) xi`, row-major
    /// `n_rollouts x control_dim`. Empty when `horizon_steps == 0`.
    pub first_noise: Vec<f64>,
    /// `S = running + h(x_T)` under the sampling cost.
    pub path_costs: Vec<f64>,
    /// Row-major `(horizon_steps + 1) x state_dim` per rollout, if recorded.
    pub paths: Option<Vec<Vec<f64>>>,
}

impl RolloutBatch {
    pub fn final_state(&self, k: usize) -> &[f64] {
        &self.final_states[k * self.state_dim..(k + 1) * self.state_dim]
    }

    pub fn first_noise_of(&self, k: usize) -> &[f64] {
        &self.first_noise[k * self.control_dim..(k + 1) * self.control_dim]
    }

    /// Path costs under another terminal cost.
    pub fn path_costs_with(&self, terminal: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        (0..self.n_rollouts)
            .map(|k| {
                let s = self.running_costs[k] + terminal(self.final_state(k));
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::NonFinite(format!("path cost of rollout {k}")))
                }
            })
            .collect()
    }
}

struct Rollout {
    running: f64,
    terminal: f64,
    last: Vec<f64>,
    first_noise: Vec<f64>,
    path: Option<Vec<f64>>,
}

/// Simulates the uncontrolled dynamics from `(x, t)`.
///
/// Rollout `k` draws its noise from ChaCha8 stream `k` under `seed`, so the
/// batch is a pure function of the inputs whatever the thread count.
pub fn sample_passive_rollouts(
    model: &dyn DiffusionModel,
    cost: &dyn PathCost,
    x: &[f64],
    t: f64,
    params: &SamplingParams,
    seed: u64,
) -> Result<RolloutBatch> {
    params.validate()?;
    let (nx, nu) = (model.state_dim(), model.control_dim());
    if x.len() != nx {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: nx,
            got: x.len(),
        });
    }
    let dt = params.dt;
    let sq = dt.sqrt();
    let sigma = model.noise_scale();

    let rollouts = params.exec.try_map(params.n_rollouts, |k| -> Result<Rollout> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut cur = x.to_vec();
        let mut next = vec![0.0; nx];
        let mut v = vec![0.0; nu];
        let mut first_noise = Vec::new();
        let mut path = params.record_paths.then(|| {
            let mut p = Vec::with_capacity((params.horizon_steps + 1) * nx);
            p.extend_from_slice(x);
            p
        });
        let mut running = 0.0;
        for step in 0..params.horizon_steps {
            running += cost.state_cost(&cur, t + step as f64 * dt) * dt;
            for (c, vc) in v.iter_mut().enumerate() {
                let dw = sq * rng.sample::<f64, _>(StandardNormal);
                if step == 0 {
                    first_noise.push(dw);
                }
                *vc = sigma[c] * dw;
            }
            step_into(model, &cur, &v, dt, &mut next);
            std::mem::swap(&mut cur, &mut next);
            if let Some(p) = path.as_mut() {
                p.extend_from_slice(&cur);
            }
        }
        let terminal = cost.terminal_cost(&cur);
        if !(running + terminal).is_finite() || cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("path cost of rollout {k}")));
        }
        Ok(Rollout {
            running,
            terminal,
            last: cur,
            first_noise,
            path,
        })
    })?;

    let n = params.n_rollouts;
    let mut batch = RolloutBatch {
        n_rollouts: n,
        dt,
        horizon_steps: params.horizon_steps,
        t0: t,
        initial_state: x.to_vec(),
        state_dim: nx,
        control_dim: nu,
        noise_scale: sigma.to_vec(),
        lambda: model.lambda(),
        running_costs: Vec::with_capacity(n),
        final_states: Vec::with_capacity(n * nx),
        first_noise: Vec::with_capacity(n * nu),
        path_costs: Vec::with_capacity(n),
        paths: params.record_paths.then(|| Vec::with_capacity(n)),
    };
    for r in rollouts {
        batch.running_costs.push(r.running);
        batch.path_costs.push(r.running + r.terminal);
        batch.final_states.extend_from_slice(&r.last);
        batch.first_noise.extend_from_slice(&r.first_noise);
        if let (Some(all), Some(p)) = (batch.paths.as_mut(), r.path) {
            all.push(p);
        }
    }
    Ok(batch)
}
