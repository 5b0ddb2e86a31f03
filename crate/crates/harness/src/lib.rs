//! Synthetic benchmark data, dataset CSV ingestion, the experiment pipeline
//! and its report files.

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod output;
pub mod synth;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, RunReport};
