//! Experiment grid: cached extraction, subset x algorithm x condition
//! evaluation, and report emission.

mod config;
mod emit;
mod grid;
mod report;
pub mod svg;

pub use config::ExperimentConfig;
pub use emit::{emit_grid, emit_report, rerender, PlotData, CONTRIBUTIONS_FILE, FAILURES_FILE, REPORT_FILE};
pub use grid::{extract_cmd, prepare_features, run_grid, run_grid_on, CellFailure, FeatureSets, GridOutcome};
pub use report::{parse_report, read_report_csv, report_to_string, write_report_csv, Condition, ReportRow, REPORT_HEADER};
