//! Level-increment (LI) truncation of M/G/1-type Markov chains.
//!
//! An M/G/1-type chain is given by repeating blocks `A_{-1}, A_0, A_1, ...`
//! and boundary blocks `B_{-1}, B_0, B_1, ...`. Truncating level increments at
//! `N` (lumping every jump of size `>= N` into a jump of exactly `N`) gives a
//! chain whose stationary distribution `pi^(N)` is computable with Ramaswami's
//! recursion. For light-tailed increments the level-wise error
//! `pi^(N)_k - pi_k` decays like `theta * r^{-N} f(N) * pi_k`; this crate
//! computes both sides of that statement.
//!
//! Pipeline:
//!
//! 1. [`model`] loads and validates the blocks, builds [`model::TruncatedModel`].
//! 2. [`gmatrix`] solves `G^(N) = sum_m A^(N)_m G^{m+1}` by functional iteration.
//! 3. [`ramaswami`] builds `R^(N)(k)`, `R_0^(N)(k)`, `K^(N)` and the level-wise
//!    distribution.
//! 4. [`asymptotics`] computes the decay profile, the SNL distribution and the
//!    convergence ratios over a sweep of `N`.
//! 5. [`oracle`] re-derives `pi^(N)` by a dense solve of the level-capped chain.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod gmatrix;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod ramaswami;

pub use error::{Error, Result};
pub use model::{Mg1Model, TailSpec, TruncatedModel};
pub use numerics::ProbabilityVector;
