//! Discrete-time LSOC over the joint MDP of a factorial subsystem.
//!
//! Passive joint dynamics are the product of per-agent kernels. The
//! desirability `Z = exp(-V)` of a first-exit problem solves the linear system
//! `Z_I = M Z_I + N Z_B` with `M = diag(exp(-q_I)) P_II` and
//! `N = diag(exp(-q_I)) P_IB`; the optimal joint policy reweights passive
//! successors by their desirability, and local policies are its marginals.
//!
//! Desirability is stored as `log Z`. State costs in the shipped scenarios
//! reach the thousands, where `exp(-q)` underflows even though the policy
//! (which only depends on successor desirabilities) stays well defined.

mod kernel;
mod linear;
mod mdp;
mod policy;
pub mod random;
mod rollout;
mod solve;
pub mod team;

pub use kernel::{passive_joint_transition, LocalKernel, STOCHASTIC_TOL};
pub use linear::{spectral_radius, LinearSystem, SparseMatrix, SpectralEstimate};
pub use mdp::DiscreteJointMdp;
pub use policy::{
    kl_divergence, log_expected_desirability, marginal_local_policy, optimal_joint_policy,
    running_cost_discrete, running_cost_factored, JointPolicy, OptimalPolicy,
};
pub use rollout::{rollout_discrete, DiscreteTrajectory};
pub use solve::{
    build_linear_system, solve_desirability, solve_mdp, DesirabilityTable, SolveReport, SolverOptions,
};
pub use team::{rollout_team, TeamAgent, TeamTrajectory};

/// Sparse probability row: `(successor joint index, probability)` sorted by
/// successor index.
pub type SparseRow = Vec<(usize, f64)>;
