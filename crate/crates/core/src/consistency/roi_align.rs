use crate::error::{Error, Result};
use crate::mix::MixBox;
use crate::nn::{Scalar, Tensor};

/// Region for a single-bin RoIAlign.
///
/// The box is given as fractions of the image extent; `spatial_scale` maps
/// image pixels onto the feature grid (feature extent / image extent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiSpec {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub image_size: (usize, usize),
    pub spatial_scale: f64,
    pub sampling_ratio: usize,
}

impl RoiSpec {
    pub fn new(
        (x1, y1, x2, y2): (f64, f64, f64, f64),
        image_size: (usize, usize),
        spatial_scale: f64,
        sampling_ratio: usize,
    ) -> Result<Self> {
        let ok = |a: f64, b: f64| (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a <= b;
        if !ok(x1, x2) || !ok(y1, y2) {
            return Err(Error::InvalidArgument(format!(
                "roi ({x1}, {y1}, {x2}, {y2}) is not an ordered box inside [0, 1]"
            )));
        }
        if !(spatial_scale > 0.0) || sampling_ratio == 0 {
            return Err(Error::InvalidArgument(format!(
                "spatial_scale {spatial_scale} and sampling_ratio {sampling_ratio} must be positive"
            )));
        }
        Ok(RoiSpec {
            x1,
            y1,
            x2,
            y2,
            image_size,
            spatial_scale,
            sampling_ratio,
        })
    }

    /// RoI for the clipped extent of a mixing box over a feature grid of `feature_width` columns.
    pub fn from_box(mix_box: &MixBox, feature_width: usize, sampling_ratio: usize) -> Result<Self> {
        RoiSpec::new(
            mix_box.normalized(),
            (mix_box.image_width, mix_box.image_height),
            feature_width as f64 / mix_box.image_width as f64,
            sampling_ratio,
        )
    }

    pub fn has_area(&self) -> bool {
        self.x2 > self.x1 && self.y2 > self.y1
    }

    /// Feature-grid coordinates `(x1, y1, x2, y2)`.
    pub fn feature_coords(&self) -> (f64, f64, f64, f64) {
        let sx = self.image_size.0 as f64 * self.spatial_scale;
        let sy = self.image_size.1 as f64 * self.spatial_scale;
        (self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)
    }
}

/// Flattened bilinear taps `(plane index, weight)` whose weighted sum is the
/// single output bin. Weights already include the `1/ratio²` averaging.
fn taps(h: usize, w: usize, roi: &RoiSpec) -> Result<Vec<(usize, f64)>> {
    if !roi.has_area() {
        return Err(Error::InvalidArgument("roi_align_1x1 needs a positive-area roi".into()));
    }
    let (fx1, fy1, fx2, fy2) = roi.feature_coords();
    // half-pixel offset: pixel centres sit at integer + 0.5
    let (sx, sy) = (fx1 - 0.5, fy1 - 0.5);
    let (bw, bh) = (fx2 - fx1, fy2 - fy1);
    let r = roi.sampling_ratio;
    let inv = 1.0 / (r * r) as f64;
    let mut out = Vec::with_capacity(4 * r * r);
    for iy in 0..r {
        let y = sy + (iy as f64 + 0.5) * bh / r as f64;
        for ix in 0..r {
            let x = sx + (ix as f64 + 0.5) * bw / r as f64;
            if y < -1.0 || y > h as f64 || x < -1.0 || x > w as f64 {
                continue;
            }
            let (y, x) = (y.max(0.0), x.max(0.0));
            let (y0, y1, ly) = corner(y, h);
            let (x0, x1, lx) = corner(x, w);
            let (hy, hx) = (1.0 - ly, 1.0 - lx);
            out.push((y0 * w + x0, hy * hx * inv));
            out.push((y0 * w + x1, hy * lx * inv));
            out.push((y1 * w + x0, ly * hx * inv));
            out.push((y1 * w + x1, ly * lx * inv));
        }
    }
    Ok(out)
}

fn corner(v: f64, n: usize) -> (usize, usize, f64) {
    let lo = v.floor() as usize;
    if lo >= n - 1 {
        (n - 1, n - 1, 0.0)
    } else {
        (lo, lo + 1, v - lo as f64)
    }
}

/// Single-bin RoIAlign over a `C×h×w` feature map; returns one value per channel.
pub fn roi_align_1x1<T: Scalar>(feature_map: &Tensor<T>, roi: &RoiSpec) -> Result<Vec<T>> {
    feature_map.expect_rank("roi_align_1x1", 3)?;
    let (c, h, w) = (feature_map.shape()[0], feature_map.shape()[1], feature_map.shape()[2]);
    let taps = taps(h, w, roi)?;
    Ok(feature_map
        .data()
        .chunks(h * w)
        .take(c)
        .map(|plane| {
            let mut acc = T::zero();
            for &(i, wgt) in &taps {
                acc += T::from_f64_lossy(wgt) * plane[i];
            }
            acc
        })
        .collect())
}

/// Gradient of [`roi_align_1x1`] with respect to the feature map.
pub fn roi_align_1x1_backward<T: Scalar>(shape: &[usize], roi: &RoiSpec, grad_out: &[T]) -> Result<Tensor<T>> {
    if shape.len() != 3 || grad_out.len() != shape[0] {
        return Err(Error::shape("roi_align_1x1 backward", &[grad_out.len(), 0, 0], shape));
    }
    let (h, w) = (shape[1], shape[2]);
    let taps = taps(h, w, roi)?;
    let mut grad = Tensor::zeros(shape);
    for (plane, &g) in grad.data_mut().chunks_mut(h * w).zip(grad_out) {
        for &(i, wgt) in &taps {
            plane[i] += T::from_f64_lossy(wgt) * g;
        }
    }
    Ok(grad)
}

/// Applies the same roi to every sample of an `N×C×h×w` batch, giving `N×C`.
pub fn roi_align_batch<T: Scalar>(feature_maps: &Tensor<T>, roi: &RoiSpec) -> Result<Tensor<T>> {
    feature_maps.expect_rank("roi_align_batch", 4)?;
    let s = feature_maps.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let taps = taps(h, w, roi)?;
    let mut out = Vec::with_capacity(n * c);
    for plane in feature_maps.data().chunks(h * w) {
        let mut acc = T::zero();
        for &(i, wgt) in &taps {
            acc += T::from_f64_lossy(wgt) * plane[i];
        }
        out.push(acc);
    }
    Tensor::from_vec(&[n, c], out)
}

pub fn roi_align_batch_backward<T: Scalar>(shape: &[usize], roi: &RoiSpec, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if shape.len() != 4 || grad_out.shape() != [shape[0], shape[1]] {
        return Err(Error::shape("roi_align_batch backward", &[shape[0], shape[1]], grad_out.shape()));
    }
    let (h, w) = (shape[2], shape[3]);
    let taps = taps(h, w, roi)?;
    let mut grad = Tensor::zeros(shape);
    for (plane, &g) in grad.data_mut().chunks_mut(h * w).zip(grad_out.data()) {
        for &(i, wgt) in &taps {
            plane[i] += T::from_f64_lossy(wgt) * g;
        }
    }
    Ok(grad)
}
