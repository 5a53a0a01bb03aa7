//! Scenario runner for the entanglement-probe simulator: JSON configs,
//! CSV/JSON outputs, parallel sweeps and the `nmprobe` command line.
//!
//! The numerics live in [`nmprobe_core`], re-exported as [`core`].

pub mod config;
pub mod error;
pub mod runner;
pub mod scenario;

pub use nmprobe_core as core;

pub use config::RunConfig;
pub use error::{RunError, RunResult};
pub use runner::{run, sweep, Axis, Overrides, RunReport};
