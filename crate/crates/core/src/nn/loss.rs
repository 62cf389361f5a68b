use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::label::SoftLabel;

/// A scalar loss and its gradient with respect to the logits it was computed from.
#[derive(Debug, Clone)]
pub struct LossGrad<T: Scalar = f32> {
    pub value: T,
    pub grad: Tensor<T>,
}

/// Row-wise log-softmax with max subtraction.
pub fn log_softmax_row<T: Scalar>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    row.iter().map(|&v| v - lse).collect()
}

pub fn softmax_row<T: Scalar>(row: &[T]) -> Vec<T> {
    log_softmax_row(row).into_iter().map(T::exp).collect()
}

pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    logits.expect_rank("softmax", 2)?;
    let c = logits.shape()[1];
    let data = logits.data().chunks(c).flat_map(softmax_row).collect();
    Tensor::from_vec(logits.shape(), data)
}

/// Mean over the batch of `−Σ_c y_c · log softmax(z)_c`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, targets: &[SoftLabel]) -> Result<LossGrad<T>> {
    logits.expect_rank("softmax_cross_entropy", 2)?;
    let (n, c) = (logits.shape()[0], logits.shape()[1]);
    if targets.len() != n {
        return Err(Error::shape("softmax_cross_entropy targets", &[n, c], &[targets.len(), c]));
    }
    let inv_n = T::from_f64_lossy(1.0 / n as f64);
    let mut total = T::zero();
    let mut grad = Tensor::zeros(logits.shape());
    for (b, target) in targets.iter().enumerate() {
        if target.num_classes() != c {
            return Err(Error::shape("softmax_cross_entropy targets", &[n, c], &[n, target.num_classes()]));
        }
        target.check()?;
        let logp = log_softmax_row(logits.item(b));
        let g = grad.item_mut(b);
        for ((gv, &lp), &y) in g.iter_mut().zip(&logp).zip(target.probs()) {
            let y = T::from_f64_lossy(y);
            if y != T::zero() {
                total -= y * lp;
            }
            *gv = (lp.exp() - y) * inv_n;
        }
    }
    Ok(LossGrad {
        value: total * inv_n,
        grad,
    })
}
