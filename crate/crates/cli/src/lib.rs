//! Configuration, presets, reference computations and commands behind the
//! `polyflow` binary.

pub mod checks;
pub mod commands;
pub mod config;
pub mod oracles;
pub mod presets;
pub mod scenario;

pub use config::{ConfigError, RunConfig};
