use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::augment::{augment, AugPolicy};
use super::Dataset;
use crate::error::Result;
use crate::label::{one_hot_batch, SoftLabel};
use crate::nn::Tensor;

/// Shuffled sample order for `epoch`; a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Splits an epoch order into batches of index lists.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
}

impl BatchPlan {
    pub fn new(order: &[usize], batch_size: usize, drop_last: bool) -> Self {
        let batches = order
            .chunks(batch_size.max(1))
            .filter(|c| !drop_last || c.len() == batch_size)
            .map(<[usize]>::to_vec)
            .collect();
        BatchPlan { batches }
    }
}

/// Gathers (and optionally augments) the samples at `indices` into an
/// `N×3×H×W` batch with one-hot labels.
pub fn assemble<R: Rng + ?Sized>(
    dataset: &Dataset,
    indices: &[usize],
    policy: &AugPolicy,
    rng: &mut R,
) -> Result<(Tensor<f32>, Vec<SoftLabel>)> {
    let (h, w) = dataset.image_size();
    let mut data = Vec::with_capacity(indices.len() * 3 * h * w);
    let mut out_hw = (h, w);
    for &i in indices {
        let img = Tensor::from_vec(&[3, h, w], dataset.image(i).to_vec())?;
        let img = augment(&img, policy, rng)?;
        out_hw = (img.shape()[1], img.shape()[2]);
        data.extend_from_slice(img.data());
    }
    let classes: Vec<usize> = indices.iter().map(|&i| dataset.labels[i]).collect();
    Ok((
        Tensor::from_vec(&[indices.len(), 3, out_hw.0, out_hw.1], data)?,
        one_hot_batch(&classes, dataset.class_count)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_pure_permutation() {
        let a = epoch_order(50, 7, 3);
        assert_eq!(a, epoch_order(50, 7, 3));
        assert_ne!(a, epoch_order(50, 7, 4));
        let mut s = a.clone();
        s.sort();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn drop_last() {
        let order: Vec<usize> = (0..10).collect();
        assert_eq!(BatchPlan::new(&order, 4, true).batches.len(), 2);
        let plan = BatchPlan::new(&order, 4, false);
        assert_eq!(plan.batches.len(), 3);
        assert_eq!(plan.batches[2], vec![8, 9]);
    }
}
