//! Configuration, stage files and the `epf` pipeline stages.

pub mod config;
pub mod io;
pub mod stages;

pub use config::{ConfigError, Preset, RunConfig};
pub use stages::{cmd_all, cmd_backtest, cmd_correlate, cmd_evaluate, cmd_forecast, cmd_synth, Run};
