//! Cross-iteration consistency: single-bin RoIAlign over the feature map,
//! KL against the stored historical logits, and total-loss assembly.

pub mod loss;
pub mod roi_align;

pub use loss::{head_forward, kl_consistency, roi_head, roi_head_mut, total_loss, LossTerms, TotalLoss};
pub use roi_align::{roi_align_1x1, roi_align_1x1_backward, roi_align_batch, roi_align_batch_backward, RoiSpec};

/// Default consistency weight for CIFAR-scale runs.
pub const DEFAULT_OMEGA: f64 = 0.1;
/// Consistency weight used for ImageNet-style configurations.
pub const IMAGENET_OMEGA: f64 = 0.5;
/// Default bilinear samples per axis inside the RoI bin.
pub const DEFAULT_SAMPLING_RATIO: usize = 2;
