//! Command-line companion of `egc-core`: CSV ingestion, JSON and CSV result
//! files, a thread-pool executor and the `egc` binary.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod report;

pub use error::{CliError, CliResult};
pub use exec::RayonExecutor;
