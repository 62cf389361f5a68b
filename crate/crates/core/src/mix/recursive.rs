use rand::Rng;
use serde::{Deserialize, Serialize};

use super::boxes::{sample_box, sample_lambda, MixBox};
use super::resize::{crop, paste, resize_planes, Interpolation};
use crate::error::{Error, Result};
use crate::label::SoftLabel;
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixMode {
    #[default]
    RecursiveMix,
    CutMix,
    Mixup,
    None,
}

/// How the source image is placed into the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeStrategy {
    /// Shrink the entire source image into the box.
    #[default]
    Resize,
    /// Paste the congruent region of the source image.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    /// Upper end of λ ∼ U[0, α] for recursive mixing.
    pub alpha: f64,
    /// Symmetric Beta parameter for the CutMix / Mixup baselines.
    pub beta: f64,
    pub mode: MixMode,
    pub interpolation: Interpolation,
    pub resize_strategy: ResizeStrategy,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            alpha: 0.5,
            beta: 1.0,
            mode: MixMode::RecursiveMix,
            interpolation: Interpolation::Nearest,
            resize_strategy: ResizeStrategy::Resize,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config {
                field: "alpha".into(),
                message: format!("{} outside [0, 1]", self.alpha),
            });
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config {
                field: "beta".into(),
                message: format!("{} must be positive", self.beta),
            });
        }
        Ok(())
    }
}

/// Historical triplet carried across iterations: the last mixed images, their
/// fused labels, and the GAP-head logits recorded for them.
#[derive(Debug, Clone)]
pub struct MixState {
    pub hist_images: Tensor<f32>,
    pub hist_labels: Vec<SoftLabel>,
    pub hist_logits: Option<Tensor<f32>>,
    pub populated: bool,
}

impl Default for MixState {
    fn default() -> Self {
        Self::new()
    }
}

impl MixState {
    pub fn new() -> Self {
        MixState {
            hist_images: Tensor::zeros(&[0, 0, 0, 0]),
            hist_labels: Vec::new(),
            hist_logits: None,
            populated: false,
        }
    }

    pub fn batch_size(&self) -> usize {
        if self.populated {
            self.hist_images.shape()[0]
        } else {
            0
        }
    }

    /// Stores the head logits produced for the images currently held in the buffer.
    pub fn record_logits(&mut self, logits: &Tensor<f32>) -> Result<()> {
        if !self.populated || logits.shape().first() != Some(&self.batch_size()) {
            return Err(Error::State(format!(
                "logits batch {:?} does not match history batch {}",
                logits.shape().first(),
                self.batch_size()
            )));
        }
        self.hist_logits = Some(logits.detach());
        Ok(())
    }
}

/// Result of one mixing call.
#[derive(Debug, Clone)]
pub struct MixOutcome {
    pub images: Tensor<f32>,
    pub labels: Vec<SoftLabel>,
    /// The box actually used; `None` when no pixels were replaced.
    pub mix_box: Option<MixBox>,
    /// Weight of the pasted / partner label (the clipped area ratio for box mixes).
    pub lambda: f64,
    /// Historical logits paired with the pasted images, handed over from the state.
    pub hist_logits: Option<Tensor<f32>>,
}

impl MixOutcome {
    pub(crate) fn identity(images: &Tensor<f32>, labels: &[SoftLabel]) -> Self {
        MixOutcome {
            images: images.detach(),
            labels: labels.to_vec(),
            mix_box: None,
            lambda: 0.0,
            hist_logits: None,
        }
    }
}

pub(crate) fn check_batch(images: &Tensor<f32>, labels: &[SoftLabel]) -> Result<(usize, usize, usize, usize)> {
    images.expect_rank("mix batch", 4)?;
    let s = images.shape();
    if labels.len() != s[0] {
        return Err(Error::shape("mix labels", &[s[0]], &[labels.len()]));
    }
    if let Some(first) = labels.first() {
        if let Some(bad) = labels.iter().find(|l| l.num_classes() != first.num_classes()) {
            return Err(Error::shape("mix labels", &[first.num_classes()], &[bad.num_classes()]));
        }
    }
    Ok((s[0], s[1], s[2], s[3]))
}

/// Places `source` (C×H×W) into `target` at `mix_box` using the given strategy.
pub(crate) fn place(
    target: &mut [f32],
    source: &[f32],
    dims: (usize, usize, usize),
    mix_box: &MixBox,
    strategy: ResizeStrategy,
    interp: Interpolation,
) {
    let (c, h, w) = dims;
    let patch = match strategy {
        ResizeStrategy::Resize => resize_planes(source, c, h, w, mix_box.height(), mix_box.width(), interp),
        ResizeStrategy::Cut => crop(source, h, w, mix_box),
    };
    paste(target, h, w, &patch, mix_box);
}

/// One recursive mixing step with a sampled λ ∼ U[0, α] and box.
pub fn recursive_mix_step<R: Rng + ?Sized>(
    state: &mut MixState,
    images: &Tensor<f32>,
    labels: &[SoftLabel],
    rng: &mut R,
    config: &MixConfig,
) -> Result<MixOutcome> {
    let (_, _, h, w) = check_batch(images, labels)?;
    let lambda = sample_lambda(rng, config.alpha)?;
    let mix_box = sample_box(rng, lambda, w, h)?;
    recursive_mix_with_box(state, images, labels, &mix_box, config)
}

/// Deterministic core of [`recursive_mix_step`] for a given box.
///
/// Sample `j` of the batch receives the historical image `j`; the fused label
/// is `λ_eff·yʰ + (1 − λ_eff)·y`. The state is then overwritten with the outputs.
/// No mixing happens on a cold state, on a batch-size change, or for an empty box.
pub fn recursive_mix_with_box(
    state: &mut MixState,
    images: &Tensor<f32>,
    labels: &[SoftLabel],
    mix_box: &MixBox,
    config: &MixConfig,
) -> Result<MixOutcome> {
    let (n, c, h, w) = check_batch(images, labels)?;
    if state.populated {
        let hist_classes = state.hist_labels.first().map(SoftLabel::num_classes);
        if let (Some(hc), Some(l)) = (hist_classes, labels.first()) {
            if hc != l.num_classes() {
                return Err(Error::shape("label dimension vs history", &[hc], &[l.num_classes()]));
            }
        }
    }
    if (mix_box.image_width, mix_box.image_height) != (w, h) {
        return Err(Error::shape("mix box extent", &[h, w], &[mix_box.image_height, mix_box.image_width]));
    }
    let hist_logits = state.hist_logits.take();
    let compatible = state.populated && state.hist_images.shape() == images.shape();

    let outcome = if !compatible || mix_box.is_empty() {
        MixOutcome::identity(images, labels)
    } else {
        let lambda = mix_box.effective_lambda;
        let mut mixed = images.detach();
        for j in 0..n {
            place(
                mixed.item_mut(j),
                state.hist_images.item(j),
                (c, h, w),
                mix_box,
                config.resize_strategy,
                config.interpolation,
            );
        }
        let fused = labels
            .iter()
            .zip(&state.hist_labels)
            .map(|(cur, hist)| cur.fuse(hist, lambda))
            .collect::<Result<Vec<_>>>()?;
        MixOutcome {
            images: mixed,
            labels: fused,
            mix_box: Some(*mix_box),
            lambda,
            hist_logits,
        }
    };

    state.hist_images = outcome.images.detach();
    state.hist_labels = outcome.labels.clone();
    state.populated = true;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::one_hot_batch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, value: f32) -> Tensor<f32> {
        Tensor::full(&[n, 3, 8, 8], value)
    }

    #[test]
    fn cold_start_is_identity_and_seeds_state() {
        let mut state = MixState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let labels = one_hot_batch(&[0, 1], 3).unwrap();
        let x = batch(2, 1.0);
        let out = recursive_mix_step(&mut state, &x, &labels, &mut rng, &MixConfig::default()).unwrap();
        assert_eq!(out.images.data(), x.data());
        assert_eq!(out.lambda, 0.0);
        assert!(out.mix_box.is_none());
        assert!(state.populated);
        assert_eq!(state.hist_images.data(), x.data());
    }

    #[test]
    fn second_step_pastes_history() {
        let mut state = MixState::new();
        let cfg = MixConfig::default();
        let b = MixBox::from_center(4.0, 4.0, 0.25, 8, 8).unwrap();
        recursive_mix_with_box(&mut state, &batch(2, 1.0), &one_hot_batch(&[0, 1], 3).unwrap(), &b, &cfg).unwrap();
        let out = recursive_mix_with_box(&mut state, &batch(2, 0.0), &one_hot_batch(&[2, 2], 3).unwrap(), &b, &cfg)
            .unwrap();
        assert_eq!(out.lambda, 0.25);
        assert_eq!(out.images.data().iter().filter(|&&v| v == 1.0).count(), 2 * 3 * 16);
        assert_eq!(out.labels[0].probs(), &[0.25, 0.0, 0.75]);
        assert_eq!(out.labels[1].probs(), &[0.0, 0.25, 0.75]);
        assert_eq!(state.hist_images.data(), out.images.data());
    }

    #[test]
    fn batch_size_change_skips_and_refreshes() {
        let mut state = MixState::new();
        let cfg = MixConfig::default();
        let b = MixBox::full(8, 8);
        recursive_mix_with_box(&mut state, &batch(4, 1.0), &one_hot_batch(&[0; 4], 2).unwrap(), &b, &cfg).unwrap();
        let out = recursive_mix_with_box(&mut state, &batch(2, 0.0), &one_hot_batch(&[1; 2], 2).unwrap(), &b, &cfg)
            .unwrap();
        assert_eq!(out.lambda, 0.0);
        assert_eq!(state.batch_size(), 2);
    }

    #[test]
    fn label_dimension_mismatch_rejected() {
        let mut state = MixState::new();
        let cfg = MixConfig::default();
        let b = MixBox::full(8, 8);
        recursive_mix_with_box(&mut state, &batch(1, 1.0), &one_hot_batch(&[0], 2).unwrap(), &b, &cfg).unwrap();
        assert!(recursive_mix_with_box(&mut state, &batch(1, 1.0), &one_hot_batch(&[0], 3).unwrap(), &b, &cfg).is_err());
    }

    #[test]
    fn logits_are_handed_over_once() {
        let mut state = MixState::new();
        let cfg = MixConfig::default();
        let b = MixBox::from_center(4.0, 4.0, 0.25, 8, 8).unwrap();
        let labels = one_hot_batch(&[0, 1], 2).unwrap();
        recursive_mix_with_box(&mut state, &batch(2, 1.0), &labels, &b, &cfg).unwrap();
        assert!(state.record_logits(&Tensor::zeros(&[3, 2])).is_err());
        state.record_logits(&Tensor::full(&[2, 2], 0.5)).unwrap();
        let out = recursive_mix_with_box(&mut state, &batch(2, 0.0), &labels, &b, &cfg).unwrap();
        assert_eq!(out.hist_logits.unwrap().data(), &[0.5; 4]);
        assert!(state.hist_logits.is_none());
    }
}
