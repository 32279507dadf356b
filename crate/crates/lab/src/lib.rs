//! Experiment driver for the reflected BDSDE laboratory: configuration,
//! study orchestration, reports, and file formats. The numerical content
//! lives in `rbdsde-core`; this crate adds the host-facing shell (CLI,
//! JSON configs, binary/CSV artifacts).

pub mod config;
pub mod constants;
pub mod error;
pub mod io;
pub mod report;
pub mod studies;

pub use config::{ExperimentConfig, Overrides, StudyKind};
pub use error::{LabError, Result};
pub use report::Report;
pub use studies::{run_experiment, RunOutcome};
