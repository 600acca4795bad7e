//! Robust Bayesian borrowing of information across the subtrials of a
//! randomised, placebo-controlled basket trial with a continuous endpoint.
//!
//! The crate is organised the way an analysis flows:
//!
//! * [`trial`] holds the data model, the built-in simulation scenarios and
//!   the synthetic data generator.
//! * [`inference`] fits Bayesian linear models by Gibbs sampling, both per
//!   subtrial and jointly across subtrials with hierarchical layers.
//! * [`borrowing`] turns stand-alone posteriors into commensurate predictive
//!   priors: Hellinger distances, spike-and-slab precision priors, softmax
//!   weights and the combined marginal predictive prior.
//! * [`comparators`] implements the benchmark analyses (standard
//!   hierarchical model, no borrowing, EXNEX).
//! * [`model`] dispatches an analysis by model name.
//! * [`simulation`] replicates trials and aggregates operating
//!   characteristics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod borrowing;
pub mod comparators;
pub mod error;
pub mod inference;
pub mod model;
pub mod rng;
pub mod simulation;
pub mod trial;

pub use error::{Error, Result};
