//! Command-line driver for `blowup-core`: configuration files, report and
//! CSV emission, and the subcommand implementations behind the `blowup` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{load_config, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] blowup_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration and usage problems, 1 for failed checks and
    /// runtime failures.
    pub fn exit_code(&self) -> u8 {
        use blowup_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::Config(_) | E::DomainCoverage { .. } | E::WeightMismatch { .. } | E::DegreeOverflow { .. }) => 2,
            CliError::Core(_) | CliError::Check(_) => 1,
        }
    }
}
