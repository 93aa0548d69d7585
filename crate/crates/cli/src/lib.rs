//! Batch experiment runner for driven hard-core Bose-Hubbard lattices.
//!
//! A run is described by a TOML config; see `configs/` for examples.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{load, Overrides, RunConfig};
pub use error::CliError;
pub use experiments::run;
