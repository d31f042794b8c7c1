//! Library surface of the experiment front end, so integration tests can
//! drive the commands without spawning processes.

pub mod commands;
pub mod config;

pub use commands::{cmd_generate, cmd_run, cmd_sweep, cmd_tune, SweepCell};
pub use config::{ExperimentConfig, PlantSection, TuningOverrides};
