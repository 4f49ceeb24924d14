//! Continuous-time LSOC for joint diffusions of a factorial subsystem.
//!
//! With `Z = exp(-V / lambda)` and `R = lambda (sigma sigma^T)^-1`, the HJB
//! equation is linear and Feynman-Kac gives `Z(x, t) = E[exp(-S / lambda)]`
//! over passive rollouts, where `S` is the path cost. The optimal control
//! `sigma sigma^T B^T grad Z / Z` is estimated from the same rollouts by
//! weighting each rollout's first noise increment with `exp(-S / lambda)`.

mod estimate;
mod model;
mod rollout;

pub use estimate::{
    control_from_costs, desirability_from_costs, pi_desirability, pi_optimal_control, rollout_weights,
    ControlEstimate, DesirabilityEstimate,
};
pub use model::{euler_maruyama_step, unicycle_drift, Brownian1d, DiffusionModel, UnicycleTeam};
pub use rollout::{sample_passive_rollouts, FnCost, PathCost, RolloutBatch, SamplingParams};
