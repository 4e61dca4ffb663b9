//! Runner for the `scarlab` experiments: configuration, a thread-pool
//! executor, CSV and SVG output, and orchestration on top of `scarlab-core`.
//!
//! Every output is deterministic: CSV numbers use `%.17g`, each parallel task
//! reduces in a fixed order, and the same config gives byte-identical tables
//! whatever the worker count.

pub mod config;
pub mod exec;
pub mod format;
pub mod runner;
pub mod svg;

pub use config::{load_config, parse_config, ConfigError, Experiment, RunConfig};
pub use exec::RayonExecutor;
pub use runner::{execute, run, RunError};
