//! Command-line front end for the cross-diffusion solver: configuration
//! parsing, scenario presets, run orchestration and on-disk artifacts.

pub mod config;
pub mod error;
pub mod presets;
pub mod report;
pub mod runner;
pub mod snapshot;
pub mod verify;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::CliError;
pub use runner::{load_config, run_scenario, Overrides};
