use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Split, CIFAR10_STATS};
use crate::error::{Error, Result};
use crate::nn::Tensor;

const SHAPES: usize = 4;
const COLORS: [[f32; 3]; 6] = [
    [0.90, 0.15, 0.15],
    [0.15, 0.80, 0.20],
    [0.20, 0.30, 0.90],
    [0.90, 0.85, 0.20],
    [0.85, 0.20, 0.85],
    [0.20, 0.85, 0.85],
];

pub const MAX_SYNTHETIC_CLASSES: usize = SHAPES * COLORS.len();

/// Class `c` → (shape, colour). Bijective over `0..MAX_SYNTHETIC_CLASSES`.
fn class_style(class: usize) -> (usize, usize) {
    let shape = class % SHAPES;
    let color = (class / SHAPES + shape) % COLORS.len();
    (shape, color)
}

fn inside(shape: usize, dx: f32, dy: f32, r: f32) -> bool {
    match shape {
        // square
        0 => dx.abs() <= r && dy.abs() <= r,
        // disk
        1 => dx * dx + dy * dy <= r * r,
        // upward triangle
        2 => dy.abs() <= r && dx.abs() <= (dy + r) / 2.0,
        // plus sign
        _ => dx.abs() <= r && dy.abs() <= r && (dx.abs() <= r / 3.0 || dy.abs() <= r / 3.0),
    }
}

fn render(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let (shape, color) = class_style(class);
    let s = size as f32;
    let r = s * (0.22 + 0.08 * rng.random::<f32>());
    let cx = r + (s - 2.0 * r) * rng.random::<f32>();
    let cy = r + (s - 2.0 * r) * rng.random::<f32>();
    let tint: Vec<f32> = COLORS[color]
        .iter()
        .map(|&v| (v + 0.16 * (rng.random::<f32>() - 0.5)).clamp(0.0, 1.0))
        .collect();
    let mut img = vec![0.0f32; 3 * size * size];
    for y in 0..size {
        for x in 0..size {
            let on = inside(shape, x as f32 + 0.5 - cx, y as f32 + 0.5 - cy, r);
            for c in 0..3 {
                let noise = 0.2 * (rng.random::<f32>() - 0.5);
                let base = if on { tint[c] } else { 0.35 };
                img[(c * size + y) * size + x] = (base + noise).clamp(0.0, 1.0);
            }
        }
    }
    img
}

/// Deterministic coloured-shape images: each class is a distinct
/// (shape, colour) pair, drawn with random size, position, tint and pixel
/// noise. Samples are interleaved by class and normalized with the CIFAR-10
/// channel statistics.
pub fn make_synthetic(seed: u64, n_classes: usize, n_per_class: usize, size: usize) -> Result<Dataset> {
    if n_classes == 0 || n_classes > MAX_SYNTHETIC_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "synthetic dataset supports 1..={MAX_SYNTHETIC_CLASSES} classes, got {n_classes}"
        )));
    }
    if size < 4 {
        return Err(Error::InvalidArgument(format!("synthetic image size {size} too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_classes * n_per_class;
    let mut images = Vec::with_capacity(n * 3 * size * size);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % n_classes;
        let mut img = render(class, size, &mut rng);
        CIFAR10_STATS.normalize_image(&mut img);
        images.extend(img);
        labels.push(class);
    }
    Dataset::new(
        Tensor::from_vec(&[n, 3, size, size], images)?,
        labels,
        n_classes,
        Split::Train,
        CIFAR10_STATS,
    )
}
