//! Distributed, Lyapunov-stable estimation of unknown sensorimotor Jacobians
//! and the sensor-guided controller built on it, together with a quasi-static
//! elastic-cable simulator used as a testbed.
//!
//! The crate is organised bottom-up:
//!
//! - [`units`]: computing units, observation stores, neighbourhood weights.
//! - [`estimator`]: the weighted gradient update, gain search and stability matrices.
//! - [`controller`]: saturated pseudo-inverse control and the Jacobian filter.
//! - [`cable`]: the planar cable simulator and babbling.
//! - [`features`]: Fourier contour features.
//! - [`baselines`]: Broyden and RLS online estimators.
//! - [`harness`]: experiment scenarios and their CSV/JSON artefacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cable;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod features;
pub mod harness;
mod serde_vec;
pub mod units;

pub use error::{Error, Result};
