//! Experiment harness behind the `turbo-rei` binary: configs, seeded runs,
//! CSV traces, convergence plots and Wilcoxon statistics.

pub mod config;
pub mod method;
pub mod plot;
pub mod runner;
pub mod selftest;
pub mod stats;
pub mod traces;

pub use config::{ConfigFile, ExperimentConfig};
pub use method::MethodSpec;
pub use runner::{run_experiment, ExperimentSummary};
pub use stats::{wilcoxon_rank_sum, wilcoxon_signed_rank, TestResult};
