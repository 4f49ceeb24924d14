//! Linearly solvable optimal control (LSOC) for networked multi-agent systems.
//!
//! The crate is organised around the factorial-subsystem view of a team: every
//! agent, together with its graph neighbours, forms a subsystem whose joint
//! state scopes all costs, desirability functions and controls.
//!
//! * [`graph`]: agent graphs, subsystem factorisation and joint-state indexing.
//! * [`discrete`]: the linear desirability system of first-exit MDPs, its
//!   solver, optimal joint/local policies and rollouts.
//! * [`continuous`]: joint diffusions, Euler-Maruyama rollouts and the
//!   path-integral estimators of desirability and optimal control.
//! * [`compose`]: kernel weights, composite terminal costs, and composite
//!   desirability/policies/controls built from cached component solutions.
//! * [`scenarios`]: the grid UAV team and the unicycle UAV team experiments.
//!
//! Data-parallel loops (rollout batches, sparse mat-vecs, batches of
//! independent problems) go through [`Execution`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.
//! Results never depend on the execution mode.

pub mod compose;
pub mod continuous;
pub mod discrete;
mod error;
mod exec;
pub mod graph;
pub mod math;
pub mod scenarios;

pub use error::{Error, Result};
pub use exec::Execution;
