use crate::error::{Error, Result};
use crate::label::SoftLabel;
use crate::nn::{log_softmax_row, softmax_cross_entropy, LossGrad, Linear, Network, Scalar, Tensor};

/// Mean over the batch of `KL(softmax(hist) ‖ softmax(roi))`. The historical
/// logits are a fixed target; the gradient is with respect to `roi_logits` only.
pub fn kl_consistency<T: Scalar>(roi_logits: &Tensor<T>, hist_logits: &Tensor<T>) -> Result<LossGrad<T>> {
    roi_logits.expect_rank("kl_consistency", 2)?;
    if roi_logits.shape() != hist_logits.shape() {
        return Err(Error::shape("kl_consistency", roi_logits.shape(), hist_logits.shape()));
    }
    let (n, c) = (roi_logits.shape()[0], roi_logits.shape()[1]);
    let inv_n = T::from_f64_lossy(1.0 / n as f64);
    let mut total = T::zero();
    let mut grad = Tensor::zeros(roi_logits.shape());
    for b in 0..n {
        let log_q = log_softmax_row(roi_logits.item(b));
        let log_p = log_softmax_row(hist_logits.item(b));
        let g = grad.item_mut(b);
        for k in 0..c {
            let p = log_p[k].exp();
            if p > T::zero() {
                total += p * (log_p[k] - log_q[k]);
            }
            g[k] = (log_q[k].exp() - p) * inv_n;
        }
    }
    Ok(LossGrad {
        value: total * inv_n,
        grad,
    })
}

/// Scalar parts of the training objective `ce + ω·λ·kl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub ce: f64,
    pub kl: f64,
    pub lambda_t: f64,
    pub omega: f64,
    pub total: f64,
}

impl LossTerms {
    pub fn new(ce: f64, kl: f64, lambda_t: f64, omega: f64) -> Self {
        LossTerms {
            ce,
            kl,
            lambda_t,
            omega,
            total: ce + omega * lambda_t * kl,
        }
    }
}

/// Loss terms plus the gradients with respect to both sets of logits.
#[derive(Debug, Clone)]
pub struct TotalLoss<T: Scalar = f32> {
    pub terms: LossTerms,
    pub grad_logits: Tensor<T>,
    /// `None` when the consistency branch was skipped.
    pub grad_roi_logits: Option<Tensor<T>>,
}

impl<T: Scalar> TotalLoss<T> {
    /// Whether the consistency branch contributes for this `(λ, ω)`.
    pub fn branch_active(lambda_t: f64, omega: f64) -> bool {
        lambda_t > 0.0 && omega > 0.0
    }
}

/// Cross-entropy on the mixed labels plus the λ-weighted consistency term.
/// The consistency branch is skipped (and `roi_logits` may be `None`) when
/// `ω·λ = 0`.
pub fn total_loss<T: Scalar>(
    gap_logits: &Tensor<T>,
    mixed_labels: &[SoftLabel],
    roi_logits: Option<&Tensor<T>>,
    hist_logits: Option<&Tensor<T>>,
    lambda_t: f64,
    omega: f64,
) -> Result<TotalLoss<T>> {
    if !(0.0..=1.0).contains(&lambda_t) {
        return Err(Error::InvalidArgument(format!("lambda_t {lambda_t} outside [0, 1]")));
    }
    if !(omega >= 0.0) {
        return Err(Error::InvalidArgument(format!("omega {omega} must be non-negative")));
    }
    let ce = softmax_cross_entropy(gap_logits, mixed_labels)?;
    let (kl, grad_roi) = match (TotalLoss::<T>::branch_active(lambda_t, omega), roi_logits, hist_logits) {
        (true, Some(roi), Some(hist)) => {
            let kl = kl_consistency(roi, hist)?;
            let scale = T::from_f64_lossy(omega * lambda_t);
            let mut g = kl.grad;
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
            (kl.value.to_f64_lossy(), Some(g))
        }
        (true, _, _) => {
            return Err(Error::InvalidArgument(
                "consistency branch active but roi or historical logits missing".into(),
            ))
        }
        _ => (0.0, None),
    };
    Ok(TotalLoss {
        terms: LossTerms::new(ce.value.to_f64_lossy(), kl, lambda_t, omega),
        grad_logits: ce.grad,
        grad_roi_logits: grad_roi,
    })
}

/// The head that classifies RoI features: `H` when shared, otherwise `H'`.
pub fn roi_head<T: Scalar>(model: &Network<T>, shared: bool) -> Result<&Linear<T>> {
    if shared {
        Ok(&model.head)
    } else {
        model
            .aux_head
            .as_ref()
            .ok_or_else(|| Error::State("unshared RoI head requested but the model has no auxiliary head".into()))
    }
}

pub fn roi_head_mut<T: Scalar>(model: &mut Network<T>, shared: bool) -> Result<&mut Linear<T>> {
    if shared {
        Ok(&mut model.head)
    } else {
        model
            .aux_head
            .as_mut()
            .ok_or_else(|| Error::State("unshared RoI head requested but the model has no auxiliary head".into()))
    }
}

/// Logits of `features` (`N×C`) through the head selected by `shared`.
pub fn head_forward<T: Scalar>(features: &Tensor<T>, model: &Network<T>, shared: bool) -> Result<Tensor<T>> {
    roi_head(model, shared)?.apply(features)
}
