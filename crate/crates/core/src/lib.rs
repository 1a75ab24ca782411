//! Accelerated Mirror Triangles methods for convex composite optimization.
//!
//! The crate provides the base method with a known Lipschitz constant, an
//! adaptive variant for `max_j f_j + h` with backtracking on the local
//! constant, a variant driven by a (delta, L)-inexact oracle, a mini-batched
//! stochastic variant with high-probability guarantees, and a
//! directional-derivative / zeroth-order variant. Every solver returns a
//! [`Trace`] carrying what the convergence envelopes need.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptive;
pub mod base;
pub mod composite;
pub mod directional;
pub mod error;
pub mod feasible;
pub mod functions;
pub mod inexact;
pub mod linalg;
pub mod minimax;
pub mod oracle;
pub mod problems;
pub mod prox;
pub mod schedule;
pub mod stochastic;
pub mod subproblem;
pub mod trace;

pub use base::{run_base, Stop};
pub use composite::Composite;
pub use directional::{
    gamma_weights, plan_directional, run_directional, run_zeroth_order, DirectionalPlan, P0Budget,
};
pub use error::{Error, Result};
pub use feasible::FeasibleSet;
pub use inexact::{run_inexact, InexactMode};
pub use minimax::{run_adaptive_minimax, MinimaxProblem};
pub use oracle::{DeltaLOracle, DirectionKind, DirectionScheme, Perturbation, StochasticOracle};
pub use problems::{Optimum, Problem};
pub use prox::{ProxKind, ProxSetup};
pub use stochastic::{run_stochastic, StochasticOptions, StochasticPlan};
pub use subproblem::{minimax_prox_step, prox_step, LinearModel};
pub use trace::{Record, Status, Trace};
