//! Command-line front end for the `cold` library.
//!
//! Subcommands live in [`commands`]; the TOML schema in [`config`].

pub mod commands;
pub mod config;
pub mod output;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COLD_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments; nothing was written.
    #[error("configuration error: {0}")]
    Config(String),
    /// A computation or I/O step failed.
    #[error("runtime error: {0}")]
    Runtime(String),
    /// Finished, but a checked criterion did not hold.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<cold::Error> for CliError {
    fn from(e: cold::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
