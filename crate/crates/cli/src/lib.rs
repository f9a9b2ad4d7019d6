//! Experiment harness: TOML configs, subcommands that write CSV tables, and
//! run manifests that replay byte for byte.

pub mod commands;
pub mod config;
pub mod converge;
pub mod error;
pub mod manifest;

pub use commands::{execute, replay, resolve_out, Command};
pub use config::{DtPolicy, ExperimentConfig, GridSection, Mode};
pub use converge::{
    non_increasing_within, reference_solution, run_converge, window_gap, ConvergenceRow, ConvergenceTable, RowMode,
};
pub use error::{CliError, CliResult};
pub use manifest::{Manifest, MANIFEST_FILE};
