//! Experiment orchestration: configuration, training and test loops,
//! metrics and result files.

mod config;
mod metrics;
mod run;
pub mod seeds;

pub use config::{Allocator, ExperimentConfig};
pub use metrics::{
    compute_metrics, load_csv, parse_csv, save_csv, to_csv_string, write_csv, EpisodeOutcome,
    MetricsRecord, CSV_HEADER,
};
pub use run::{
    evaluate_point, load_team, run_episode, run_evaluation, run_training, save_team, Exhaustive,
    GreedyTeam, Policy, Random, TrainingRun, TRAINING_LOG,
};
