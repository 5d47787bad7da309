//! Experiment runner: configuration, the generate / reconstruct / evaluate
//! phases and report writing.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use error::{HarnessError, Result};
