//! Objective assembly, mini-batching, optimization and model selection.

mod adam;
mod batches;
mod config;
mod fit;
pub mod objective;

pub use adam::{AdamHyper, AdamState};
pub use batches::{make_batches, Batch};
pub use config::{SelectionMetric, TrainConfig};
pub use fit::{
    fit, metric_report, seconds, train_step, EarlyStopper, EpochRecord, FitOutcome, StepLosses, TrainReport,
    Verdict,
};
pub use objective::{escfr_objective, BatchView, ObjectiveValue, PlanSource, MIN_GROUP_FOR_OT};
