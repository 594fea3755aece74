//! Numerics for Bayesian model selection between misspecified models.
//!
//! * [`selection`]: divergences, random-walk statistics, the A/B/C
//!   decomposition of the log marginal likelihood and behavior classes.
//! * [`coin`]: the fair-coin comparison of two point-mass binomial models.
//! * [`balance`]: the Gaussian sign and variance comparisons.
//! * [`phylo`]: Jukes–Cantor star-tree simulation and tree posteriors.
//! * [`experiments`]: the config-driven runner behind the `paradox` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod balance;
pub mod coin;
pub mod error;
pub mod experiments;
pub mod phylo;
pub mod quad;
pub mod rng;
pub mod selection;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
