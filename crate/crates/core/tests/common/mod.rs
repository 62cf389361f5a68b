#![allow(dead_code)]

use std::collections::BTreeMap;

use recursivemix::label::SoftLabel;
use recursivemix::mix::MixMode;
use recursivemix::nn::Tensor;
use recursivemix::trainer::{DatasetKind, EpochMetrics, Observer, StepRecord, TrainConfig};
use recursivemix::Result;

/// Small synthetic configuration that trains in well under a second per epoch.
pub fn desk_config(mode: MixMode, epochs: usize) -> TrainConfig {
    TrainConfig {
        mode,
        dataset: DatasetKind::Synthetic,
        synthetic_classes: 4,
        synthetic_train_per_class: 32,
        synthetic_test_per_class: 16,
        image_size: 16,
        channels: [8, 16, 32],
        batch_size: 32,
        epochs,
        warmup_epochs: 1,
        base_lr: 0.05,
        record_seconds: false,
        ..TrainConfig::default()
    }
}

/// Per-step loss trace as exact bit patterns.
#[derive(Default)]
pub struct Trace {
    pub steps: Vec<[u64; 3]>,
    pub epochs: Vec<EpochMetrics>,
}

impl Observer for Trace {
    fn on_step(&mut self, s: &StepRecord<'_>) -> Result<()> {
        self.steps.push([s.terms.ce.to_bits(), s.terms.kl.to_bits(), s.terms.total.to_bits()]);
        Ok(())
    }

    fn on_epoch(&mut self, row: &EpochMetrics) -> Result<()> {
        self.epochs.push(*row);
        Ok(())
    }
}

pub fn same_bits(a: &Tensor<f32>, b: &Tensor<f32>) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn on_simplex(l: &SoftLabel) -> bool {
    let s: f64 = l.probs().iter().sum();
    (s - 1.0).abs() <= 1e-6 && l.probs().iter().all(|&p| p >= 0.0)
}

pub fn support(l: &SoftLabel) -> Vec<usize> {
    l.probs().iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(c, _)| c).collect()
}

/// Label of a recursive chain by direct expansion: the class pasted at step
/// k (k ≥ 1) keeps weight (1 − λ_k)·Π_{i>k} λ_i, the cold-start class keeps
/// Π_{i≥1} λ_i.
pub fn symbolic_chain(classes: &[usize], lambdas: &[f64]) -> BTreeMap<usize, f64> {
    assert_eq!(classes.len(), lambdas.len() + 1);
    let mut out = BTreeMap::new();
    for (k, &c) in classes.iter().enumerate() {
        let tail: f64 = lambdas[k..].iter().product();
        let own = if k == 0 { 1.0 } else { 1.0 - lambdas[k - 1] };
        *out.entry(c).or_insert(0.0) += own * tail;
    }
    out
}

/// Bilinear value of a plane at continuous `(y, x)` (pixel centres at
/// integer + 0.5 after the caller's shift), zero outside `[-1, n]`.
fn bilinear_at(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    if y < -1.0 || y > h as f64 || x < -1.0 || x > w as f64 {
        return 0.0;
    }
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (dy, dx) = (y - y0 as f64, x - x0 as f64);
    plane[y0 * w + x0] * (1.0 - dy) * (1.0 - dx)
        + plane[y0 * w + x1] * (1.0 - dy) * dx
        + plane[y1 * w + x0] * dy * (1.0 - dx)
        + plane[y1 * w + x1] * dy * dx
}

/// Mean of a dense `grid × grid` bilinear sampling of the bin.
pub fn dense_roi_oracle(plane: &[f64], h: usize, w: usize, (fx1, fy1, fx2, fy2): (f64, f64, f64, f64), grid: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid {
        let y = fy1 - 0.5 + (i as f64 + 0.5) * (fy2 - fy1) / grid as f64;
        for j in 0..grid {
            let x = fx1 - 0.5 + (j as f64 + 0.5) * (fx2 - fx1) / grid as f64;
            acc += bilinear_at(plane, h, w, y, x);
        }
    }
    acc / (grid * grid) as f64
}
