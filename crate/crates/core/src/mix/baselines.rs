//! Within-batch CutMix and Mixup, used as ablation baselines.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::boxes::{sample_box, MixBox};
use super::recursive::{check_batch, place, MixConfig, MixOutcome, ResizeStrategy};
use super::resize::Interpolation;
use crate::error::{Error, Result};
use crate::label::SoftLabel;
use crate::nn::Tensor;

fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64) -> Result<f64> {
    let beta = Beta::new(a, a).map_err(|e| Error::InvalidArgument(format!("beta({a}, {a}): {e}")))?;
    Ok(beta.sample(rng))
}

fn permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// CutMix with λ ∼ Beta(β, β), one box per batch, partner by random permutation.
pub fn cutmix_step<R: Rng + ?Sized>(
    images: &Tensor<f32>,
    labels: &[SoftLabel],
    rng: &mut R,
    config: &MixConfig,
) -> Result<MixOutcome> {
    let (n, _, h, w) = check_batch(images, labels)?;
    if n < 2 {
        return Ok(MixOutcome::identity(images, labels));
    }
    let lambda = sample_beta(rng, config.beta)?;
    let perm = permutation(rng, n);
    let mix_box = sample_box(rng, lambda, w, h)?;
    cutmix_with_partners(
        images,
        labels,
        &perm,
        &mix_box,
        config.resize_strategy,
        config.interpolation,
    )
}

/// Pastes partner `perm[j]` into sample `j` at `mix_box`; labels are fused
/// by the clipped area ratio.
pub fn cutmix_with_partners(
    images: &Tensor<f32>,
    labels: &[SoftLabel],
    perm: &[usize],
    mix_box: &MixBox,
    strategy: ResizeStrategy,
    interp: Interpolation,
) -> Result<MixOutcome> {
    let (n, c, h, w) = check_batch(images, labels)?;
    if perm.len() != n || perm.iter().any(|&p| p >= n) {
        return Err(Error::InvalidArgument(format!("partner list {perm:?} invalid for batch {n}")));
    }
    if mix_box.is_empty() {
        return Ok(MixOutcome::identity(images, labels));
    }
    let lambda = mix_box.effective_lambda;
    let mut mixed = images.detach();
    for (j, &p) in perm.iter().enumerate() {
        place(mixed.item_mut(j), images.item(p), (c, h, w), mix_box, strategy, interp);
    }
    let fused = labels
        .iter()
        .zip(perm)
        .map(|(cur, &p)| cur.fuse(&labels[p], lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixOutcome {
        images: mixed,
        labels: fused,
        mix_box: Some(*mix_box),
        lambda,
        hist_logits: None,
    })
}

/// Mixup with λ ∼ Beta(a, a).
pub fn mixup_step<R: Rng + ?Sized>(
    images: &Tensor<f32>,
    labels: &[SoftLabel],
    rng: &mut R,
    alpha_beta: f64,
) -> Result<MixOutcome> {
    let (n, ..) = check_batch(images, labels)?;
    if alpha_beta <= 0.0 {
        return Err(Error::InvalidArgument(format!("mixup parameter {alpha_beta} must be positive")));
    }
    let lambda = sample_beta(rng, alpha_beta)?;
    let perm = permutation(rng, n);
    mixup_with_partners(images, labels, &perm, lambda)
}

/// `x̃ = λ·x_j + (1 − λ)·x_perm[j]`, labels alike. The returned `lambda` is
/// the partner weight `1 − λ`, matching the other mix outcomes.
pub fn mixup_with_partners(images: &Tensor<f32>, labels: &[SoftLabel], perm: &[usize], lambda: f64) -> Result<MixOutcome> {
    let (n, ..) = check_batch(images, labels)?;
    if perm.len() != n || perm.iter().any(|&p| p >= n) {
        return Err(Error::InvalidArgument(format!("partner list {perm:?} invalid for batch {n}")));
    }
    let (la, lb) = (lambda as f32, (1.0 - lambda) as f32);
    let mut mixed = images.detach();
    for (j, &p) in perm.iter().enumerate() {
        let partner = images.item(p);
        for (v, &q) in mixed.item_mut(j).iter_mut().zip(partner) {
            *v = la * *v + lb * q;
        }
    }
    let fused = labels
        .iter()
        .zip(perm)
        .map(|(cur, &p)| cur.fuse(&labels[p], 1.0 - lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixOutcome {
        images: mixed,
        labels: fused,
        mix_box: None,
        lambda: 1.0 - lambda,
        hist_logits: None,
    })
}
