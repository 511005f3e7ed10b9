//! Mini-batch Adam training with early stopping, and evaluation metrics.

mod adam;
mod metrics;
mod train;

pub use adam::{AdamState, DecayMode, DEFAULT_ADAM_EPS, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_LEARNING_RATE};
pub use metrics::{auc, format_mean_std, logloss, mean_std, MetricsReport};
pub use train::{
    evaluate, run_trials, train, EpochRecord, StopReason, TrainConfig, TrainOutcome, TrainState, TrialResult,
    TrialSummary, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE,
};
