//! Handover performance of multicast mobility schemes: closed-form loss and
//! delay windows, an event-driven handover simulator, a honeycomb mobility
//! model and a CSV experiment runner.

pub mod analytic;
pub mod config;
pub mod engine;
mod error;
pub mod experiment;
pub mod mobility;
pub mod stochastic;

pub use config::{load_config, ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use experiment::{render_experiment, run_experiment};
