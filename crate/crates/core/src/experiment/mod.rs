//! Experiment configuration, the per-iteration simulation loop, report files
//! and parameter sweeps.

mod config;
mod report;
mod runner;
mod sweep;

pub use config::{
    apply_override, load_config, load_config_with, parse_assignment, parse_config, BaseLoadConfig,
    CapacityConfig, DatasetConfig, ExperimentConfig, OptimizerKind, PowerConfig, TierPower,
};
pub use report::{
    emit_report, read_rows_csv, write_rows_csv, ReportFiles, RowRecord, RowStats, Stat, Summary,
    CONFIG_FILE, LAYERS_FILE, ROWS_FILE, ROW_HEADER, SUMMARY_FILE,
};
pub use runner::{
    effective_solver, run_experiment, run_on_corpus, Corpus, ExperimentReport, ReportRow,
};
pub use sweep::{run_sweep, write_sweep, SweepAxis, SweepPoint, SweepSeries};
