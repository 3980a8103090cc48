//! File formats, the staged experiment runner, reports and self-checks
//! built on `dndf-core`.

pub mod check;
pub mod cohort_io;
pub mod config;
pub mod error;
pub mod model_io;
pub mod report;
pub mod runner;

pub use config::{DataSource, ExperimentConfig, ModelKind};
pub use error::{Result, RunError};
pub use runner::{run_all, run_stage, RunOutput, StageResult};
