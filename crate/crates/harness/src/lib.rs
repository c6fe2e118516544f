//! Experiment driver for `smc-genealogy`: configuration files, replicate
//! scheduling, CSV/JSON/SVG output and the `smcgen` command line.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod plot;
pub mod run;
pub mod stats;

pub use config::{ExperimentConfig, RawConfig};
pub use error::{HarnessError, Result};
