//! Experiment harness: configuration, link-level data generation, metrics
//! and the evaluation sweeps.

mod config;
mod dataset;
mod metrics;
mod sweeps;

pub use config::ExperimentConfig;
pub use dataset::{
    load_chains, sample_key, save_chains, Dataset, LinkSample, LinkSimulator, SnrPolicy, CHAINS_FORMAT_VERSION, CHAINS_MAGIC,
    DATASET_FORMAT_VERSION, DATASET_MAGIC,
};
pub use metrics::{metric_mse, metric_nmse, ErrorAccumulator, SweepResult, SweepRow, CSV_HEADER};
pub use sweeps::{
    classifier_data, predictor_data, run_accuracy_sweep, run_mismatch, run_mse_sweep, run_pilot_sweep, test_set, train_all,
    train_classifier_for, train_predictor_for, train_snr_policy, EvalOptions, PilotSweep, DEFAULT_LINK,
};
