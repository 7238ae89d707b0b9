//! Adaptive recursive-gradient optimization for ℓ2-regularized logistic
//! regression on sparse LIBSVM-format datasets.
//!
//! The crate provides:
//! - LIBSVM parsing, normalization and deterministic train/test splitting
//!   ([`data`], [`fetch`]);
//! - the logistic objective with all gradient and curvature queries the
//!   optimizers need ([`model`]), plus a least-squares analogue whose
//!   step-size sub-problem is exactly quadratic ([`leastsq`]);
//! - AI-SARAH and the baselines SARAH, SARAH+, SVRG, ADAM and SGD with
//!   momentum ([`optim`]);
//! - theoretical step-size schedules and convergence-bound evaluation on
//!   small problems ([`theory`]);
//! - experiment orchestration: seeded runs, CSV metrics, tuning grids
//!   ([`harness`]), and synthetic problem generation ([`synth`]).

// Comparisons written as `!(x > 0.0)` are deliberate: they treat NaN as a
// validation failure, which `x <= 0.0` would silently let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fetch;
pub mod harness;
pub mod leastsq;
pub mod model;
pub mod optim;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
