//! Experiment harness for `reputation-core`: TOML sweep configs, table
//! reproduction, analytic-vs-simulated comparison and CSV output.

pub mod config;
pub mod output;
pub mod runner;
pub mod tables;

pub use config::{ConfigError, ExperimentConfig, ExperimentPoint};
pub use output::{write_csv, ResultRow, SimCell};
pub use runner::{
    compare, compare_rows, evaluate_point, price_point, reproduce_table, run_experiment, CellCheck,
    Comparison, Reproduction, RunError, RunOptions, SimOverride,
};
pub use tables::{TableId, Tolerance};
