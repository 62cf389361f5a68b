use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Network, Tensor};

/// Position of the target in the descending ordering of a logit row. Ties
/// rank the lower class index first.
fn target_rank(row: &[f32], target: usize) -> usize {
    let t = row[target];
    row.iter()
        .enumerate()
        .filter(|&(c, &v)| v > t || (v == t && c < target))
        .count()
}

/// Top-1 and top-5 error (percent) of `logits` (`N×C`) against integer targets.
pub fn topk_errors(logits: &Tensor<f32>, targets: &[usize]) -> Result<(f64, f64)> {
    logits.expect_rank("topk_errors", 2)?;
    let (n, c) = (logits.shape()[0], logits.shape()[1]);
    if n != targets.len() {
        return Err(Error::shape("topk_errors", &[targets.len(), c], logits.shape()));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::InvalidArgument(format!("target {bad} outside [0, {c})")));
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let (mut miss1, mut miss5) = (0usize, 0usize);
    for (b, &t) in targets.iter().enumerate() {
        let rank = target_rank(logits.item(b), t);
        miss1 += usize::from(rank >= 1);
        miss5 += usize::from(rank >= 5);
    }
    let pct = |m: usize| 100.0 * m as f64 / n as f64;
    Ok((pct(miss1), pct(miss5)))
}

/// Single-crop evaluation through backbone, GAP and the deployable head.
pub fn evaluate(model: &Network<f32>, dataset: &Dataset, batch_size: usize) -> Result<(f64, f64)> {
    let n = dataset.len();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let item = dataset.images.item_len();
    let s = dataset.images.shape();
    let mut rows = Vec::with_capacity(n * model.num_classes());
    for start in (0..n).step_by(batch_size.max(1)) {
        let end = (start + batch_size).min(n);
        let x = Tensor::from_vec(
            &[end - start, s[1], s[2], s[3]],
            dataset.images.data()[start * item..end * item].to_vec(),
        )?;
        rows.extend_from_slice(model.infer(&x)?.gap_logits.data());
    }
    topk_errors(&Tensor::from_vec(&[n, model.num_classes()], rows)?, &dataset.labels)
}
