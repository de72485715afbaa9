//! Command-line front end for the `ccqi-core` models: configuration parsing,
//! subcommand dispatch and artifact formatting.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Command};
pub use config::{parse_config, ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] ccqi_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}
