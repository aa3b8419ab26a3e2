//! Library half of the `geo-pid` command-line tool: config parsing, the
//! commands and their output formats.

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;

pub use commands::{
    cmd_critical, cmd_gains, cmd_sim, cmd_sweep, CliError, Overrides, Range, RunSummary,
    SweepRanges,
};
pub use config::{parse_config, serialize_config, ConfigError, SystemConfig, BUILTIN_NAMES};
