//! Batch front-end for the qbattery toolkit: strict JSON experiment
//! configs in, CSV or JSON result tables out.

pub mod config;
pub mod run;
pub mod table;

pub use config::{ConfigError, Experiment, ExperimentConfig, Kind};
pub use run::run;
pub use table::{emit, Cell, Format, ResultTable};
