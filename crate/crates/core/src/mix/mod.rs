//! Recursive mixing state machine, box sampling, resize-fill and the
//! CutMix / Mixup baselines.

pub mod baselines;
pub mod boxes;
pub mod recursive;
pub mod resize;

pub use baselines::{cutmix_step, cutmix_with_partners, mixup_step, mixup_with_partners};
pub use boxes::{sample_box, sample_lambda, MixBox};
pub use recursive::{
    recursive_mix_step, recursive_mix_with_box, MixConfig, MixMode, MixOutcome, MixState, ResizeStrategy,
};
pub use resize::{resize_fill, resize_planes, Interpolation};

use crate::label::SoftLabel;

/// Threshold below which a label entry no longer counts as a supervised class.
pub const EFFECTIVE_CLASS_THRESHOLD: f64 = 1e-4;

/// Mean over the batch of the number of label entries above `threshold`.
pub fn effective_class_count(labels: &[SoftLabel], threshold: f64) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let total: usize = labels.iter().map(|l| l.support_above(threshold)).sum();
    total as f64 / labels.len() as f64
}
