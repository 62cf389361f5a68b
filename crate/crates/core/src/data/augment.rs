use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Reflect-pad, random crop, random horizontal flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugPolicy {
    pub pad: usize,
    pub crop: usize,
    pub hflip_prob: f64,
    pub enabled: bool,
}

impl Default for AugPolicy {
    fn default() -> Self {
        AugPolicy {
            pad: 4,
            crop: 32,
            hflip_prob: 0.5,
            enabled: true,
        }
    }
}

impl AugPolicy {
    /// Standard policy for square images of side `size` (pad = size / 8).
    pub fn for_size(size: usize) -> Self {
        AugPolicy {
            pad: (size / 8).max(1),
            crop: size,
            ..AugPolicy::default()
        }
    }

    pub fn disabled() -> Self {
        AugPolicy {
            enabled: false,
            ..AugPolicy::default()
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.crop > height.min(width) + 2 * self.pad {
            return Err(Error::InvalidArgument(format!(
                "crop {} exceeds padded extent {}",
                self.crop,
                height.min(width) + 2 * self.pad
            )));
        }
        if self.pad >= height.min(width) {
            return Err(Error::InvalidArgument(format!("reflect pad {} needs a larger image", self.pad)));
        }
        Ok(())
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    };
    r as usize
}

/// Applies `policy` to one `C×H×W` image. Returns `C×crop×crop`.
pub fn augment<R: Rng + ?Sized>(image: &Tensor<f32>, policy: &AugPolicy, rng: &mut R) -> Result<Tensor<f32>> {
    image.expect_rank("augment", 3)?;
    if !policy.enabled {
        return Ok(image.detach());
    }
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    policy.validate(h, w)?;
    let (oy, ox, flip) = sample_params(policy, h, w, rng);
    Tensor::from_vec(&[c, policy.crop, policy.crop], apply(image.data(), (c, h, w), policy, oy, ox, flip))
}

/// Crop offsets (in padded coordinates) and flip decision.
pub fn sample_params<R: Rng + ?Sized>(policy: &AugPolicy, h: usize, w: usize, rng: &mut R) -> (usize, usize, bool) {
    let oy = rng.random_range(0..=h + 2 * policy.pad - policy.crop);
    let ox = rng.random_range(0..=w + 2 * policy.pad - policy.crop);
    let flip = rng.random::<f64>() < policy.hflip_prob;
    (oy, ox, flip)
}

fn apply(src: &[f32], (c, h, w): (usize, usize, usize), policy: &AugPolicy, oy: usize, ox: usize, flip: bool) -> Vec<f32> {
    let k = policy.crop;
    let pad = policy.pad as isize;
    let mut out = vec![0.0f32; c * k * k];
    for ch in 0..c {
        for y in 0..k {
            let sy = reflect(oy as isize + y as isize - pad, h);
            for x in 0..k {
                let xx = if flip { k - 1 - x } else { x };
                let sx = reflect(ox as isize + xx as isize - pad, w);
                out[(ch * k + y) * k + x] = src[(ch * h + sy) * w + sx];
            }
        }
    }
    out
}
