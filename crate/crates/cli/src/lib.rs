//! Dataset planning and pipeline orchestration for morph generation,
//! enhancement, detector training and evaluation.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod plan;
pub mod samples;
pub mod synth;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{Mode, Workspace};
