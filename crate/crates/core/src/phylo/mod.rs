//! Jukes–Cantor star-tree models on three and four taxa.

pub mod jc;
pub mod likelihood;
pub mod marginal;
pub mod mcmc;
pub mod optimize;
pub mod patterns;

pub use jc::{jc_transition, RateModel};
pub use likelihood::{
    best_fit_params_3taxon, best_fit_params_4taxon, log_likelihood, simulate_alignment, simulate_counts, BestFit,
};
pub use marginal::{
    importance_log_marginal_4taxon, log_marginal_quadrature_3taxon, log_marginals_3taxon, tree_posteriors_3taxon,
    ImportanceEstimate, PhyloPrior, TreePosterior,
};
pub use mcmc::{mcmc_tree_posteriors_4taxon, McmcConfig};
pub use patterns::{
    pattern_probs_3taxon, pattern_probs_4taxon, quartet_class, quartet_labels, quartet_multiplicities, triplet_class,
    triplet_multiplicities, star3_pattern_probs, ClockBranchLengths, QuartetBranches, SitePatternCounts, Topology3,
    Topology4, QUARTET_CLASSES, TRIPLET_CLASSES,
};
