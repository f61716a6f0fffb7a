//! Cohomogeneity-one quasi-Einstein metrics as an ODE problem.
//!
//! A homogeneous principal orbit `G/H` with `n` pairwise inequivalent
//! isotropy summands ([`HomSpaceSpec`]) reduces the quasi-Einstein equation
//! on `I × G/H` to a first-order system in `(y, L, ξ)` ([`dynamics`]). On top
//! of that this crate provides a Dirichlet shooting solver with continuation
//! ([`bvp`]) and blow-up diagnostics ([`singularity`]).
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bvp;
pub mod dynamics;
mod error;
pub mod homspace;
pub mod integrator;
pub mod linalg;
pub mod singularity;

pub use dynamics::{PhaseState, SystemParams, Trajectory};
pub use error::{ContinuationStage, Error, Result};
pub use homspace::{HomSpaceSpec, HypothesisFlags, RicciBoundEstimates};
pub use integrator::{IntegratorOptions, Termination};
