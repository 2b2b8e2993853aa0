//! Experiment configs, drivers, CSV output and the validation suite behind the CLI.

pub mod config;
pub mod csv;
pub mod experiments;
pub mod validate;

pub use config::{Experiment, ExperimentConfig, Value, DEFAULT_SEED, SEED_ENV};
pub use csv::{format_real, Cell, CsvTable};
pub use experiments::{
    e2_alpha_grid, run_e1, run_e2, run_e3, run_e4, run_e5, run_experiment, write_outputs, E1Result, E2Result,
    E3Result, E5Result, ExperimentOutput,
};
pub use validate::{run_validation_suite, CheckRecord, ValidationReport, TAGS};
