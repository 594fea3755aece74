//! Config-driven experiment runner with seeded, order-independent replication.

pub mod config;
pub mod run;
pub mod summary;

pub use config::{Experiment, ExperimentConfig, Mode, OneOrMany};
pub use run::{resolve_workers, run_experiment, RunReport, WORKERS_ENV};
pub use summary::{summarize_replicates, ternary_histogram, SummaryStats, TernaryCell, TernaryHistogram};
