//! Training loop, evaluation, metrics, and diagnostics (class activation maps,
//! effective class counts).

pub mod cam;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod train;

pub use cam::{cam_from_features, emit_cam, Cam};
pub use config::{DatasetKind, TrainConfig};
pub use eval::{evaluate, topk_errors};
pub use metrics::{EpochMetrics, RunMetrics, CSV_HEADER};
pub use train::{build_model, load_datasets, stream_rng, train, train_on, Observer, Stream, StepRecord, TrainOutcome};

/// Per-epoch mean effective class count of a finished run.
pub fn track_effective_classes(metrics: &RunMetrics) -> Vec<f64> {
    metrics.rows.iter().map(|r| r.eff_classes).collect()
}
