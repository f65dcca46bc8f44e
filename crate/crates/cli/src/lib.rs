//! Command-line front end: configuration, dataset loading, file formats and
//! the end-to-end experiment driver.

pub mod cave;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod register;
pub mod stackio;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, PipelineReport};
