use serde::{Deserialize, Serialize};

use super::boxes::MixBox;
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Nearest,
    Bilinear,
}

/// Resizes a `C×H×W` plane stack to `C×out_h×out_w`.
///
/// Nearest maps output index `i` to `floor((i + 0.5)·H / out_h)`. Bilinear
/// uses half-pixel centres without corner alignment, clamping at the border.
pub fn resize_planes(
    src: &[f32],
    channels: usize,
    height: usize,
    width: usize,
    out_h: usize,
    out_w: usize,
    interp: Interpolation,
) -> Vec<f32> {
    let mut out = vec![0.0f32; channels * out_h * out_w];
    let sy = height as f64 / out_h as f64;
    let sx = width as f64 / out_w as f64;
    match interp {
        Interpolation::Nearest => {
            let rows: Vec<usize> = (0..out_h)
                .map(|i| (((i as f64 + 0.5) * sy).floor() as usize).min(height - 1))
                .collect();
            let cols: Vec<usize> = (0..out_w)
                .map(|j| (((j as f64 + 0.5) * sx).floor() as usize).min(width - 1))
                .collect();
            for c in 0..channels {
                let plane = &src[c * height * width..(c + 1) * height * width];
                for (i, &r) in rows.iter().enumerate() {
                    for (j, &col) in cols.iter().enumerate() {
                        out[(c * out_h + i) * out_w + j] = plane[r * width + col];
                    }
                }
            }
        }
        Interpolation::Bilinear => {
            let axis = |n_out: usize, n_in: usize, scale: f64| -> Vec<(usize, usize, f64)> {
                (0..n_out)
                    .map(|i| {
                        let s = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
                        let lo = (s.floor() as usize).min(n_in - 1);
                        let hi = (lo + 1).min(n_in - 1);
                        (lo, hi, s - lo as f64)
                    })
                    .collect()
            };
            let rows = axis(out_h, height, sy);
            let cols = axis(out_w, width, sx);
            for c in 0..channels {
                let plane = &src[c * height * width..(c + 1) * height * width];
                for (i, &(y0, y1, ly)) in rows.iter().enumerate() {
                    for (j, &(x0, x1, lx)) in cols.iter().enumerate() {
                        let v = (1.0 - ly) * ((1.0 - lx) * plane[y0 * width + x0] as f64 + lx * plane[y0 * width + x1] as f64)
                            + ly * ((1.0 - lx) * plane[y1 * width + x0] as f64 + lx * plane[y1 * width + x1] as f64);
                        out[(c * out_h + i) * out_w + j] = v as f32;
                    }
                }
            }
        }
    }
    out
}

/// Shrinks the whole historical image (`C×H×W`) to the clipped extent of `mix_box`.
pub fn resize_fill(hist_image: &Tensor<f32>, mix_box: &MixBox, interp: Interpolation) -> Result<Tensor<f32>> {
    hist_image.expect_rank("resize_fill", 3)?;
    if mix_box.is_empty() {
        return Err(Error::InvalidArgument("resize_fill needs a box with positive area".into()));
    }
    let (c, h, w) = (hist_image.shape()[0], hist_image.shape()[1], hist_image.shape()[2]);
    let data = resize_planes(hist_image.data(), c, h, w, mix_box.height(), mix_box.width(), interp);
    Tensor::from_vec(&[c, mix_box.height(), mix_box.width()], data)
}

/// Writes a `C×h×w` patch into `[y1, y2) × [x1, x2)` of a `C×H×W` image.
pub(crate) fn paste(target: &mut [f32], height: usize, width: usize, patch: &[f32], mix_box: &MixBox) {
    let (ph, pw) = (mix_box.height(), mix_box.width());
    let channels = target.len() / (height * width);
    for c in 0..channels {
        for i in 0..ph {
            let dst = (c * height + mix_box.y1 + i) * width + mix_box.x1;
            let src = (c * ph + i) * pw;
            target[dst..dst + pw].copy_from_slice(&patch[src..src + pw]);
        }
    }
}

/// Copies the congruent region `[y1, y2) × [x1, x2)` out of a `C×H×W` image.
pub(crate) fn crop(source: &[f32], height: usize, width: usize, mix_box: &MixBox) -> Vec<f32> {
    let (ph, pw) = (mix_box.height(), mix_box.width());
    let channels = source.len() / (height * width);
    let mut out = Vec::with_capacity(channels * ph * pw);
    for c in 0..channels {
        for i in 0..ph {
            let start = (c * height + mix_box.y1 + i) * width + mix_box.x1;
            out.extend_from_slice(&source[start..start + pw]);
        }
    }
    out
}
