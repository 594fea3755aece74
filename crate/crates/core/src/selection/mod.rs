//! Two-model Bayesian comparison in general: divergences, random-walk
//! statistics of the log marginal-likelihood ratio, the three-term
//! decomposition, sandwich information matrices and behavior classes.

mod classify;
mod decomposition;
mod growth;
mod information;
mod kl;
mod walk;

pub use classify::{classify_behavior, BehaviorClass, ComparisonStructure, EQUAL_WRONGNESS_TOLERANCE};
pub use decomposition::{decompose_log_marginal, DecompositionTerms};
pub use growth::{estimate_growth_order, GrowthOrder, GROWTH_CI_LEVEL};
pub use information::{information_matrices, InformationMatrices, ParametricDensity};
pub use kl::{kl_divergence_numeric, Interval};
pub use walk::{prob_nonextreme_walk, random_walk_moments, NonextremeProbability, RandomWalkSpec};
