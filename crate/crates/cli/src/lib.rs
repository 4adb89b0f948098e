//! Library side of the `ptstab` command-line tool: config loading, the
//! subcommands and SVG plotting.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{
    cmd_check_assumptions, cmd_run, cmd_sweep, cmd_verify_cert, RunOptions, EXIT_CHECK_FAILED, EXIT_CONFIG,
    EXIT_PASS, EXIT_RUNTIME,
};
pub use config::{load_config, parse_config, ConfigError, Experiment, PlantChoice};
