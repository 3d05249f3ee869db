//! Splitting, optimization, experiments and reports.

mod experiment;
mod optim;
mod report;
mod split;
mod trainer;

pub use experiment::{
    default_spec_for, evaluate, prepare_input, prepare_inputs, run_experiment,
    run_experiment_observed, summarize, train_seed, transfer_experiment, transfer_experiments,
    AccuracySummary, DataVariant, ExperimentConfig, ExperimentRecord, LabeledSet, Observer,
    PrepareConfig, TransferMode,
};
pub use optim::{Optimizer, OptimizerConfig};
pub use report::{
    compression_factor, read_csv, render_table, rows, thousands, write_csv, ReportRow,
};
pub use split::{split_dataset, Split, DEFAULT_RATIOS, TWO_WAY_RATIOS};
pub use trainer::{
    accuracy, lr_at_epoch, train_model, EpochMetrics, Example, StopMetric, TrainConfig,
    TrainOutcome,
};
