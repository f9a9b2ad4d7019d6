use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_CFL: i32 = 4;
pub const EXIT_DENSITY: i32 = 5;
pub const EXIT_BLOWUP: i32 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] isaacs_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use isaacs_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(E::Cfl { .. }) => EXIT_CFL,
            CliError::Core(E::Density { .. }) => EXIT_DENSITY,
            CliError::Core(E::NonFinite { .. }) => EXIT_BLOWUP,
            _ => EXIT_OTHER,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
