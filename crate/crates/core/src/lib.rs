//! Gibbs-sampling selection of sub-likelihood components for composite
//! likelihood estimation.
//!
//! The crate is organised bottom-up: [`model`] defines sub-likelihood
//! families and simulators, [`estimator`] solves the composite score and
//! evaluates the jackknife variance objective, [`sampler`] runs the Gibbs
//! chain over component masks, [`stability`] applies the error-controlled
//! stability threshold, and [`harness`] drives Monte Carlo experiments. [`cli`] is the
//! command-line surface over all of them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod mask;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod stability;

pub use error::{Error, Result};
pub use mask::ComponentMask;
