//! `egoqa` pipeline: configuration, subcommands and exit-code mapping.

pub mod commands;
pub mod config;
mod masks;

pub use commands::{run, RunOptions};
pub use config::PipelineConfig;
pub use masks::JsonlMaskSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Align,
    Fuse,
    Facts,
    Forge,
    Balance,
    Score,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Align => "align",
            Command::Fuse => "fuse",
            Command::Facts => "facts",
            Command::Forge => "forge",
            Command::Balance => "balance",
            Command::Score => "score",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 transport or unscored items.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Transport(_) => 3,
        }
    }
}
