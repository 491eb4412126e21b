//! Seeded experiment sweeps, result writers and the command-line front end.

mod cli;
mod config;
mod experiments;
mod output;

pub use cli::{cli_main, OUT_DIR_ENV};
pub use config::{AlgorithmKind, ExperimentConfig, FlopsConfig, OutputFormat, PlaceMapping};
pub use experiments::{
    csi_conditions, derive_seed, instance_channel, run_csi_experiment, run_flops_experiment, run_sumrate_experiment,
    summarize, FlopsReport, ResultRecord, SummaryRow,
};
pub use output::{write_flops, write_meta, write_records, Meta, FLOPS_HEADER, RECORD_HEADER};
