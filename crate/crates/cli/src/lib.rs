//! Reproducible experiment driver for `rauzy-spectra`.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod stages;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use report::emit_report;
pub use run::{run_experiment, run_stages, RunRecord};
pub use stages::Stage;
