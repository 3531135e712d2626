//! Experiment configs, runners and report emitters behind the CLI.
//!
//! Every file written here carries the run's seed, config hash and artifact
//! version: PGM comments, CSV columns, JSON fields or a summary header.

mod commands;
mod config;
mod experiments;
mod table;

pub use commands::{
    cmd_generate, cmd_preprocess, cmd_report, cmd_run, Outcome, PreprocessRecord, Summary, PREPROCESS_REPORT, RESOLVED_CONFIG,
    SUMMARY_CSV, SUMMARY_TXT,
};
pub use config::{DatasetConfig, ExperimentConfig, ExperimentId, TrainSettings};
pub use experiments::{descriptor_row, run_experiment, FUSED_ROW, RATIOS};
pub use table::{read_csv_aucs, ResultRow, ResultTable, RESULTS_CSV, RESULTS_JSON};

/// One-line provenance stamp embedded in every emitted file.
pub fn provenance_comment(seed: u64, config_hash: &str) -> String {
    format!("dvnet seed={seed} config_hash={config_hash} version={}", crate::ARTIFACT_VERSION)
}
