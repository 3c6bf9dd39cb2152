//! Experiment harness: builds and checks antithetic tables, and runs
//! uniform and antithetic SGD side by side over several seeds, writing
//! plot-ready CSV traces.

pub mod commands;
pub mod spec;

pub use commands::{
    cmd_build_table, cmd_run, cmd_verify, load_dataset, load_table, stats_path, RunOutcome,
    RunRecord, RunReport, SummaryRow, TableSummary, VerifyReport, ZeroWeightComparison, CSV_HEADER,
    SUMMARY_HEADER,
};
pub use spec::{ExperimentSpec, LossArg};
