//! Experiment runner for `erlang-core`: JSON configs, CSV output, the
//! figure set and a rayon-backed [`erlang_core::simulate::Replicator`].

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod parallel;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
pub use parallel::Rayon;
