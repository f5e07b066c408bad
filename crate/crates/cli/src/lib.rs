//! Experiment runner: dataset generation, JEPA tuning, decoder training,
//! evaluation, embedding analysis and ablation sweeps.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod sweep;

pub use cli::{main_with_args, run_with_args};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
