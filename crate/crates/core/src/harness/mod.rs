//! Declarative experiment runs.
//!
//! An [`ExperimentConfig`] names a suite and its parameters; [`run`]
//! executes it and returns a [`RunReport`] of config echo, metric,
//! assertion, verdict and timing rows, written as CSV or JSONL.

mod config;
mod report;
mod suites;

pub use config::{parse_kv, ExperimentConfig, Format, Suite, KEYS};
pub use report::{Row, RowKind, RunReport, Value, CSV_HEADER};
pub use suites::{
    corrupted_quartet, run, run_acceptance, run_baselines, run_distortion, run_gamma_sweep, run_simulate,
    run_verify, worked_quartet, CHI_SQUARE_ALPHA, MC_TV_BOUND, WORKED_BLOCKS,
};
