//! Policy-evaluation laboratory for conventional TD(λ) and on-policy
//! Emphatic TD(λ).
//!
//! The crate is organised bottom-up:
//!
//! - [`td`]: the two learners as incremental updates over [`td::TransitionSample`]s.
//! - [`funcapprox`]: features and value approximators (chain, two-state,
//!   tile coding, and the spiral approximator with its matrix exponential).
//! - [`env`]: the four testbeds and their per-state γ, λ, interest schedules.
//! - [`oracle`]: exact fixed points, stability diagnosis, RMSE and ground truth.
//! - [`harness`]: declarative experiments, seeded parallel sweeps, CSV and SVG output.

// `!(x <= limit)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod funcapprox;
pub mod harness;
pub mod oracle;
pub mod td;

pub use error::{Error, Result};
