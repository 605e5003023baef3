//! Command-line front end for `tdqmc-core`: TOML configs, CSV/JSON outputs,
//! run manifests, checkpoints and the oracle reference file.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod reference;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl From<tdqmc_core::Error> for CliError {
    fn from(e: tdqmc_core::Error) -> Self {
        use tdqmc_core::Error as E;
        match e {
            E::Capacity { .. } => CliError::Capacity(format!(
                "{e}; the tensor-grid solver stores G^N amplitudes, so use fewer electrons or a coarser oracle grid"
            )),
            E::InvalidConfig { .. } | E::InvalidGrid(_) | E::InvalidScan(_) | E::InvalidKernelWidth(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
