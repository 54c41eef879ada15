//! Config-driven pipeline behind the `riskflow` binary.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::{Overrides, PipelineConfig, Resolved};
pub use error::{CliError, Result};
pub use pipeline::{run, Command, Outcome};
