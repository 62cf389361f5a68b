//! Dataset ingestion, the synthetic shapes dataset, per-sample augmentation,
//! batching, and PPM emission.

pub mod augment;
pub mod cifar;
pub mod loader;
pub mod ppm;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub use augment::{augment, AugPolicy};
pub use cifar::{decode_cifar_records, load_cifar10_bin, read_cifar_batch};
pub use loader::{epoch_order, BatchPlan};
pub use synthetic::{make_synthetic, MAX_SYNTHETIC_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Per-channel normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

pub const CIFAR10_STATS: ChannelStats = ChannelStats {
    mean: [0.4914, 0.4822, 0.4465],
    std: [0.2470, 0.2435, 0.2616],
};

impl ChannelStats {
    pub fn normalize(&self, channel: usize, v: f32) -> f32 {
        (v - self.mean[channel]) / self.std[channel]
    }

    pub fn denormalize(&self, channel: usize, v: f32) -> f32 {
        v * self.std[channel] + self.mean[channel]
    }

    /// Normalizes a `3×H×W` image with values in `[0, 1]` in place.
    pub fn normalize_image(&self, image: &mut [f32]) {
        let plane = image.len() / 3;
        for (i, v) in image.iter_mut().enumerate() {
            *v = self.normalize(i / plane, *v);
        }
    }

    pub fn denormalize_image(&self, image: &[f32]) -> Vec<f32> {
        let plane = image.len() / 3;
        image
            .iter()
            .enumerate()
            .map(|(i, &v)| self.denormalize(i / plane, v))
            .collect()
    }
}

/// Normalized images with integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `N×3×H×W`, normalized.
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub split: Split,
    pub stats: ChannelStats,
}

impl Dataset {
    pub fn new(images: Tensor<f32>, labels: Vec<usize>, class_count: usize, split: Split, stats: ChannelStats) -> Result<Self> {
        images.expect_rank("dataset images", 4)?;
        if images.shape()[0] != labels.len() || images.shape()[1] != 3 {
            return Err(Error::shape("dataset", &[labels.len(), 3, 0, 0], images.shape()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {class_count})")));
        }
        Ok(Dataset {
            images,
            labels,
            class_count,
            split,
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.images.shape()[2], self.images.shape()[3])
    }

    pub fn image(&self, i: usize) -> &[f32] {
        self.images.item(i)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    /// Writes the first `count` images as `sample_<i>_class_<c>.ppm`.
    pub fn export_ppm(&self, dir: &std::path::Path, count: usize) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (h, w) = self.image_size();
        (0..count.min(self.len()))
            .map(|i| {
                let path = dir.join(format!("sample_{i}_class_{}.ppm", self.labels[i]));
                ppm::write_image(&path, self.image(i), h, w, &self.stats)?;
                Ok(path)
            })
            .collect()
    }
}
