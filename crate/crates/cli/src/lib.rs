//! Command-line orchestration of the modem: configuration loading, the
//! transmit, channel and receive pipeline, sweeps and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;
pub mod sweep;

pub use commands::{cmd_channel, cmd_loopback, cmd_rx, cmd_tx};
pub use config::{RunConfig, SweepSpec};
pub use error::{exit, CliError, Result};
pub use manifest::{RunManifest, Seeds};
pub use sweep::cmd_sweep;
