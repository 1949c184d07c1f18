//! Propensity-score balancing weights for binary and multi-arm treatment
//! comparisons, centred on overlap weighting.
//!
//! The usual pipeline is
//!
//! 1. [`data::ingest`] a delimited file (or build a [`Dataset`] in memory),
//! 2. fit a propensity model with [`propensity::fit`],
//! 3. turn scores into weights with [`weights::compute_weights`],
//! 4. estimate with [`estimators::hajek_estimate`] (or the augmented /
//!    score-adjusted regression estimators),
//! 5. attach a standard error from [`inference::sandwich_variance`] or
//!    [`inference::bootstrap_variance`],
//! 6. check the design with [`balance::balance_report`].
//!
//! [`simulation`] holds seeded data-generating processes and the Monte Carlo
//! harness; [`cli`] backs the `bw` binary.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
mod linalg;
pub mod propensity;
pub mod rng;
pub mod simulation;
pub mod weights;

pub use data::{Dataset, Design, IngestConfig, OutcomeFamily};
pub use error::{Error, Result};
pub use estimators::EffectEstimate;
pub use propensity::{FitOptions, PropensityFit};
pub use weights::{WeightScheme, WeightVector};
