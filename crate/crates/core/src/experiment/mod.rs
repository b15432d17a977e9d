//! Experiment orchestration: configuration, report emission and the
//! subcommands behind the `erdlab` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

pub use commands::{cmd_all, cmd_bayes, cmd_compare, cmd_ntk, cmd_pca, cmd_phase, cmd_train};
pub use config::ExperimentConfig;
pub use output::RunManifest;
