use rand::Rng;

use crate::error::{Error, Result};

/// Mixing rectangle. `center` and `nominal_size` are the sampled continuous
/// values; the integer extent `[x1, x2) × [y1, y2)` is the clipped region that
/// actually gets pasted, and `effective_lambda` is its area ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixBox {
    pub center: (f64, f64),
    pub nominal_size: (f64, f64),
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub effective_lambda: f64,
}

impl MixBox {
    /// Box of nominal area ratio `lambda` centred at `(cx, cy)`, clipped to the image.
    pub fn from_center(cx: f64, cy: f64, lambda: f64, width: usize, height: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image extent must be positive".into()));
        }
        let rw = width as f64 * lambda.sqrt();
        let rh = height as f64 * lambda.sqrt();
        let clip = |v: f64, hi: usize| v.round().clamp(0.0, hi as f64) as usize;
        let x1 = clip(cx - rw / 2.0, width);
        let x2 = clip(cx + rw / 2.0, width);
        let y1 = clip(cy - rh / 2.0, height);
        let y2 = clip(cy + rh / 2.0, height);
        let effective_lambda = ((x2 - x1) * (y2 - y1)) as f64 / (width * height) as f64;
        Ok(MixBox {
            center: (cx, cy),
            nominal_size: (rw, rh),
            x1,
            y1,
            x2,
            y2,
            image_width: width,
            image_height: height,
            effective_lambda,
        })
    }

    /// Box with a given integer extent `[x1, x2) × [y1, y2)`; the nominal
    /// values are set to match it exactly.
    pub fn from_extent(x1: usize, y1: usize, x2: usize, y2: usize, width: usize, height: usize) -> Result<Self> {
        if x1 > x2 || y1 > y2 || x2 > width || y2 > height {
            return Err(Error::InvalidArgument(format!(
                "extent [{x1}, {x2}) × [{y1}, {y2}) not inside {width}×{height}"
            )));
        }
        let (bw, bh) = ((x2 - x1) as f64, (y2 - y1) as f64);
        Ok(MixBox {
            center: (x1 as f64 + bw / 2.0, y1 as f64 + bh / 2.0),
            nominal_size: (bw, bh),
            x1,
            y1,
            x2,
            y2,
            image_width: width,
            image_height: height,
            effective_lambda: (bw * bh) / (width * height) as f64,
        })
    }

    /// The box covering the whole image.
    pub fn full(width: usize, height: usize) -> Self {
        MixBox::from_center(width as f64 / 2.0, height as f64 / 2.0, 1.0, width, height)
            .expect("valid full box")
    }

    pub fn width(&self) -> usize {
        self.x2 - self.x1
    }

    pub fn height(&self) -> usize {
        self.y2 - self.y1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x1..self.x2).contains(&x) && (self.y1..self.y2).contains(&y)
    }

    /// Clipped extent as fractions of the image, `(x1, y1, x2, y2)`.
    pub fn normalized(&self) -> (f64, f64, f64, f64) {
        let (w, h) = (self.image_width as f64, self.image_height as f64);
        (
            self.x1 as f64 / w,
            self.y1 as f64 / h,
            self.x2 as f64 / w,
            self.y2 as f64 / h,
        )
    }
}

/// λ ∼ U[0, α).
pub fn sample_lambda<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(rng.random::<f64>() * alpha)
}

/// Centre uniform over the image, side lengths `W√λ × H√λ`.
pub fn sample_box<R: Rng + ?Sized>(rng: &mut R, lambda: f64, width: usize, height: usize) -> Result<MixBox> {
    let cx = rng.random::<f64>() * width as f64;
    let cy = rng.random::<f64>() * height as f64;
    MixBox::from_center(cx, cy, lambda, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nominal_size_follows_sqrt_lambda() {
        let b = MixBox::from_center(16.0, 16.0, 0.25, 32, 32).unwrap();
        assert_eq!(b.nominal_size, (16.0, 16.0));
        assert_eq!((b.x1, b.x2, b.y1, b.y2), (8, 24, 8, 24));
        assert_eq!(b.effective_lambda, 0.25);
    }

    #[test]
    fn corner_center_clips() {
        let b = MixBox::from_center(0.0, 0.0, 0.25, 32, 32).unwrap();
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (0, 0, 8, 8));
        assert_eq!(b.effective_lambda, 0.0625);
    }

    #[test]
    fn zero_lambda_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_box(&mut rng, 0.0, 32, 32).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.effective_lambda, 0.0);
    }

    #[test]
    fn lambda_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_lambda(&mut rng, 0.0).unwrap(), 0.0);
        assert!(sample_lambda(&mut rng, 1.5).is_err());
        assert!(sample_lambda(&mut rng, -0.1).is_err());
    }
}
