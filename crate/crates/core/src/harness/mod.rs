//! Experiment orchestration: JSON configs, end-to-end runs with their CSV,
//! JSON and checkpoint artifacts, the per-cycle learning-rate oracle, and
//! the command-line interface.

mod cli;
mod config;
mod experiment;
mod oracle;

pub use cli::{cli_main, cli_main_with};
pub use config::{ArchSpec, DatasetSpec, ExperimentConfig, PruneSpec, TrainingSpec};
pub use experiment::{
    checkpoint_path, gradient_distribution_report, hist_path, histogram_csv, run_experiment,
    DistributionRow, RunRecord, HIST_CSV_HEADER,
};
pub use oracle::{
    default_grid, oracle_search, OracleCandidate, OracleCycle, OracleResult, INTERVAL_POINTS,
    ORACLE_CSV_HEADER, THREADS_ENV,
};

#[cfg(test)]
pub(crate) const MINIMAL_CONFIG: &str = r#"{
    "dataset": {"kind": "synthetic", "n": 300, "d": 5, "classes": 3},
    "arch": {"hidden": [16], "activation": "relu"},
    "optimizer": {"kind": "sgd_momentum"},
    "schedule": {"kind": "constant", "lr": 0.05},
    "training": {"epochs": 3, "batch_size": 32},
    "prune": {"method": {"kind": "global_magnitude"}, "rate": 0.2, "cycles": 2},
    "seed": 7
}"#;
