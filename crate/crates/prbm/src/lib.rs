//! File formats, experiment configuration, grid sweeps and the command-line
//! runner for [`prbm_core`].

pub mod cli;
pub mod config;
pub mod data_io;
pub mod error;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ExperimentPlan};
pub use error::{Error, Result};
pub use prbm_core;
pub use sweep::{run_sweep, SweepReport, Workspace};
