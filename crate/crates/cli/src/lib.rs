//! Command-line harness for `qcfd-core`: run configuration, file formats
//! (beats CSV, TensorFile, checkpoints), report writing and the `qcfd`
//! subcommands.

pub mod app;
pub mod beats;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;
pub mod tensor;

pub use app::{run_command, run_with};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use tensor::TensorFile;
