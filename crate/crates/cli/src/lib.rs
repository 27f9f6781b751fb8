//! Experiment harness for `fbsplit`: config parsing, deterministic seeding,
//! orchestration of the verification campaigns, CSV and summary output.

// `!(x > 0.0)` is how NaN gets rejected alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod summary;

pub use config::{ConfigError, ExperimentConfig};
pub use experiments::{run, validate, Artifact, Experiment, Outcome, RunError};
pub use summary::{Criterion, RunSummary};
