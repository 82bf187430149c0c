//! Batch experiments: coverage of the interval methods, interval length
//! against sample size, and paired method comparisons.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, GridSpec, InnerSpec, MethodKind, ModelKind, VarianceMode};
pub use report::{CoverageReport, CoverageSummary, LengthRow, LengthStudy, PointStats, Region, RunMetadata, CSV_SCHEMA};
pub use runner::{run_bw_comparison, run_coverage, run_estimator_comparison, run_length_study};
