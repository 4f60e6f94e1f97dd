//! Configuration, orchestration, persistence, and verification for the
//! noise-space posterior sampling toolkit.
//!
//! The library half of the `latentwalk` binary: strict TOML experiment
//! configs, multi-chain runs with per-chain counter-based seeds, CSV/PGM/JSON
//! artifacts written atomically, and the numerical verification suites.

pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics_cmd;
pub mod runner;
pub mod verify;

pub use config::{parse_config, ExperimentPlan};
pub use error::CliError;
