//! Temperature field reconstruction for two-dimensional heat-source systems.
//!
//! The crate covers the whole benchmark pipeline:
//!
//! * [`layout`]: heat-source systems, built-in reference cases, rasterization.
//! * [`generator`]: steady conduction solver and dataset generation.
//! * [`observation`]: monitoring points and observation representations.
//! * [`reconstruct`]: interpolation, regression and MLP baselines.
//! * [`metrics`]: whole-domain, component and boundary error metrics.

pub mod error;
pub mod field;
pub mod generator;
pub mod layout;
pub mod metrics;
pub mod observation;
pub mod reconstruct;

pub use error::{Result, TfrError};
pub use field::TemperatureField;
