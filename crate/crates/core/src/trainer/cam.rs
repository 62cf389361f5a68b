use std::path::Path;

use crate::data::ppm;
use crate::error::{Error, Result};
use crate::nn::{Network, Tensor};

/// Class activation map on the feature grid, min-max normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cam {
    pub values: Vec<f32>,
    pub height: usize,
    pub width: usize,
}

impl Cam {
    /// Nearest-neighbour upscaling to `out_h × out_w`.
    pub fn upscale(&self, out_h: usize, out_w: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(out_h * out_w);
        for y in 0..out_h {
            let sy = y * self.height / out_h;
            for x in 0..out_w {
                out.push(self.values[sy * self.width + x * self.width / out_w]);
            }
        }
        out
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > self.values[best] { i } else { best })
    }

    pub fn write_ppm(&self, path: &Path, out_h: usize, out_w: usize) -> Result<()> {
        ppm::write_gray(path, &self.upscale(out_h, out_w), out_h, out_w)
    }
}

/// `Σ_c weights[c]·features[c]` over a `C×h×w` map, then min-max normalized.
/// A constant map (including all-zero weights) normalizes to all zeros.
pub fn cam_from_features(features: &[f32], channels: usize, height: usize, width: usize, weights: &[f32]) -> Result<Cam> {
    let plane = height * width;
    if features.len() != channels * plane || weights.len() != channels {
        return Err(Error::shape("cam", &[channels, height, width], &[weights.len(), features.len()]));
    }
    let mut values = vec![0.0f32; plane];
    for (f, &w) in features.chunks(plane).zip(weights) {
        for (v, &x) in values.iter_mut().zip(f) {
            *v += w * x;
        }
    }
    let lo = values.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = hi - lo;
    if span > 0.0 && span.is_finite() {
        values.iter_mut().for_each(|v| *v = (*v - lo) / span);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(Cam { values, height, width })
}

/// CAM of one `C×H×W` image for `class_id`, using the deployable head weights.
pub fn emit_cam(model: &Network<f32>, image: &Tensor<f32>, class_id: usize) -> Result<Cam> {
    image.expect_rank("emit_cam", 3)?;
    if class_id >= model.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {class_id} outside [0, {})",
            model.num_classes()
        )));
    }
    let s = image.shape();
    let x = image.detach().reshape(&[1, s[0], s[1], s[2]])?;
    let fmap = model.infer(&x)?.feature_map;
    let fs = fmap.shape();
    cam_from_features(fmap.data(), fs[1], fs[2], fs[3], model.head.weight.item(class_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zeros() {
        let cam = cam_from_features(&[1.0, 2.0, 3.0, 4.0], 1, 2, 2, &[0.0]).unwrap();
        assert_eq!(cam.values, vec![0.0; 4]);
    }

    #[test]
    fn one_hot_cell_is_argmax() {
        let mut f = vec![0.0f32; 2 * 9];
        f[9 + 5] = 1.0;
        let cam = cam_from_features(&f, 2, 3, 3, &[0.3, 2.0]).unwrap();
        assert_eq!(cam.argmax(), 5);
        assert_eq!(cam.values[5], 1.0);
    }

    #[test]
    fn upscale_nearest() {
        let cam = Cam { values: vec![0.0, 1.0], height: 1, width: 2 };
        assert_eq!(cam.upscale(2, 4), vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }
}
