use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// SGD with classic momentum; weight decay is folded into the gradient:
/// `v ← μ·v + g + wd·θ`, `θ ← θ − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd<T: Scalar = f32> {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(base_lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            base_lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn velocity(&self) -> &[Vec<T>] {
        &self.velocity
    }

    /// Applies one update to `params`. The parameter list must have the
    /// same order and shapes on every call.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], lr: f64) -> Result<()> {
        if let Some(i) = params.iter().position(|p| p.grad().is_none()) {
            return Err(Error::State(format!("parameter {i} has no gradient")));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        if self.velocity.len() != params.len()
            || self.velocity.iter().zip(params.iter()).any(|(v, p)| v.len() != p.len())
        {
            return Err(Error::State("parameter list changed between optimizer steps".into()));
        }
        let mu = T::from_f64_lossy(self.momentum);
        let wd = T::from_f64_lossy(self.weight_decay);
        let lr = T::from_f64_lossy(lr);
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            let g = p.grad().expect("checked above").to_vec();
            for ((theta, vel), g) in p.data_mut().iter_mut().zip(v.iter_mut()).zip(g) {
                *vel = mu * *vel + g + wd * *theta;
                *theta -= lr * *vel;
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// Linear warmup followed by cosine decay, indexed by (fractional) epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub min_lr: f64,
}

impl LrSchedule {
    pub fn new(base_lr: f64, warmup_epochs: usize, total_epochs: usize) -> Self {
        LrSchedule {
            base_lr,
            warmup_epochs,
            total_epochs,
            min_lr: 0.0,
        }
    }

    pub fn lr_at(&self, epoch: f64) -> Result<f64> {
        if !(0.0..=self.total_epochs as f64).contains(&epoch) {
            return Err(Error::InvalidArgument(format!(
                "epoch {epoch} outside [0, {}]",
                self.total_epochs
            )));
        }
        let warmup = self.warmup_epochs as f64;
        if epoch < warmup {
            return Ok(self.base_lr * (epoch + 1.0) / warmup);
        }
        let span = self.total_epochs as f64 - warmup;
        if span <= 0.0 {
            return Ok(self.min_lr);
        }
        let progress = (epoch - warmup) / span;
        Ok(self.min_lr
            + (self.base_lr - self.min_lr) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
    }
}
