//! Central finite-difference checks of every analytic gradient in the crate.
//!
//! The error of a check is `max_i |a_i − n_i| / max(max_i |a_i|, max_i |n_i|)`,
//! i.e. the worst elementwise deviation relative to the gradient's scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::consistency::{kl_consistency, roi_align_batch, roi_align_batch_backward, total_loss, RoiSpec};
use crate::error::Result;
use crate::label::SoftLabel;
use crate::nn::{softmax_cross_entropy, Conv2d, Gap, Layer, Linear, MaxPool2d, Network, Relu, Scalar, Tensor};

pub const DEFAULT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_EPS_F64: f64 = 1e-5;
pub const DEFAULT_EPS_F32: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub eps: f64,
    pub seed: u64,
    /// Corrupt one analytic gradient (linear weight) to prove the suite bites.
    pub sabotage: bool,
}

impl SuiteOptions {
    pub fn for_precision<T: Scalar>() -> Self {
        let eps = if std::mem::size_of::<T>() == 8 { DEFAULT_EPS_F64 } else { DEFAULT_EPS_F32 };
        SuiteOptions {
            eps,
            seed: 0,
            sabotage: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub precision: &'static str,
    pub checks: Vec<CheckResult>,
}

impl GradReport {
    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self, threshold: f64) -> bool {
        self.checks.iter().all(|c| c.max_rel_err < threshold)
    }

    /// One line per check; verdicts are printed only when a threshold is given.
    pub fn render(&self, threshold: Option<f64>) -> String {
        let mut s = match threshold {
            Some(t) => format!("gradient check ({}), threshold {t:e}\n", self.precision),
            None => format!("gradient check ({}), informational\n", self.precision),
        };
        for c in &self.checks {
            let verdict = match threshold {
                Some(t) if c.max_rel_err < t => "  ok",
                Some(_) => "  FAIL",
                None => "",
            };
            s.push_str(&format!(
                "  {:<28} {:>5} entries  max rel err {:.3e}{verdict}\n",
                c.name, c.entries, c.max_rel_err
            ));
        }
        s
    }
}

/// Relative error of an analytic gradient against finite differences.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0, f64::max)
}

/// Central differences of `loss` around `x`.
pub fn numeric_grad<T: Scalar>(x: &[T], eps: f64, mut loss: impl FnMut(&[T]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = T::from_f64_lossy(orig.to_f64_lossy() + eps);
        let plus = loss(&probe)?;
        probe[i] = T::from_f64_lossy(orig.to_f64_lossy() - eps);
        let minus = loss(&probe)?;
        probe[i] = orig;
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn randn<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(StandardNormal.sample(rng)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

/// `Σ r ⊙ y`, a scalar whose gradient with respect to `y` is `r`.
fn project<T: Scalar>(y: &Tensor<T>, r: &Tensor<T>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a.to_f64_lossy() * b.to_f64_lossy()).sum()
}

fn with_data<T: Scalar>(like: &Tensor<T>, data: &[T]) -> Tensor<T> {
    Tensor::from_vec(like.shape(), data.to_vec()).expect("same length")
}

struct Suite {
    rng: ChaCha8Rng,
    opts: SuiteOptions,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn record(&mut self, name: &str, analytic: Vec<f64>, numeric: Vec<f64>) {
        self.checks.push(CheckResult {
            name: name.into(),
            max_rel_err: relative_error(&analytic, &numeric),
            entries: analytic.len(),
        });
    }

    fn conv<T: Scalar>(&mut self, name: &str, stride: usize, padding: usize) -> Result<()> {
        let eps = self.opts.eps;
        let conv = Conv2d::<T>::from_parts(
            randn(&mut self.rng, &[3, 2, 3, 3]),
            randn(&mut self.rng, &[3]),
            stride,
            padding,
        )?;
        let x = randn::<T>(&mut self.rng, &[2, 2, 5, 5]);
        let mut probe = conv.clone();
        let r = randn::<T>(&mut self.rng, &probe.output_shape(x.shape())?);
        probe.forward(&x)?;
        let dx = probe.backward(&r)?;
        let (dw, db) = (probe.weight.grad().unwrap().to_vec(), probe.bias.grad().unwrap().to_vec());

        let eval = |c: &Conv2d<T>, x: &Tensor<T>| -> Result<f64> { Ok(project(&c.clone().forward(x)?, &r)) };
        let n = numeric_grad(x.data(), eps, |d| eval(&conv, &with_data(&x, d)))?;
        self.record(&format!("{name}.input"), to_f64(dx.data()), n);
        let n = numeric_grad(conv.weight.data(), eps, |d| {
            let c = Conv2d::from_parts(with_data(&conv.weight, d), conv.bias.detach(), stride, padding)?;
            eval(&c, &x)
        })?;
        self.record(&format!("{name}.weight"), to_f64(&dw), n);
        let n = numeric_grad(conv.bias.data(), eps, |d| {
            let c = Conv2d::from_parts(conv.weight.detach(), with_data(&conv.bias, d), stride, padding)?;
            eval(&c, &x)
        })?;
        self.record(&format!("{name}.bias"), to_f64(&db), n);
        Ok(())
    }

    fn linear<T: Scalar>(&mut self) -> Result<()> {
        let eps = self.opts.eps;
        let mut lin = Linear::<T>::zeros(6, 4);
        lin.weight = randn(&mut self.rng, &[4, 6]);
        lin.bias = randn(&mut self.rng, &[4]);
        let x = randn::<T>(&mut self.rng, &[3, 6]);
        let r = randn::<T>(&mut self.rng, &[3, 4]);
        let mut probe = lin.clone();
        let dx = probe.backward_from(&x, &r)?;
        let mut dw = to_f64(probe.weight.grad().unwrap());
        if self.opts.sabotage {
            dw[0] = dw[0] * 1.01 + 1e-3;
        }
        let db = to_f64(probe.bias.grad().unwrap());

        let n = numeric_grad(x.data(), eps, |d| Ok(project(&lin.apply(&with_data(&x, d))?, &r)))?;
        self.record("linear.input", to_f64(dx.data()), n);
        let n = numeric_grad(lin.weight.data(), eps, |d| {
            let mut l = lin.clone();
            l.weight = with_data(&lin.weight, d);
            Ok(project(&l.apply(&x)?, &r))
        })?;
        self.record("linear.weight", dw, n);
        let n = numeric_grad(lin.bias.data(), eps, |d| {
            let mut l = lin.clone();
            l.bias = with_data(&lin.bias, d);
            Ok(project(&l.apply(&x)?, &r))
        })?;
        self.record("linear.bias", db, n);
        Ok(())
    }

    fn relu<T: Scalar>(&mut self) -> Result<()> {
        let mut x = randn::<T>(&mut self.rng, &[2, 3, 4, 4]);
        // keep inputs away from the kink
        for v in x.data_mut() {
            if v.to_f64_lossy().abs() < 0.05 {
                *v = T::from_f64_lossy(0.1);
            }
        }
        let r = randn::<T>(&mut self.rng, x.shape());
        let mut layer = Relu::default();
        layer.forward(&x)?;
        let dx = layer.backward(&r)?;
        let n = numeric_grad(x.data(), self.opts.eps, |d| Ok(project(&Relu::default().forward(&with_data(&x, d))?, &r)))?;
        self.record("relu.input", to_f64(dx.data()), n);
        Ok(())
    }

    fn maxpool<T: Scalar>(&mut self) -> Result<()> {
        // distinct, well-separated values so the argmax never flips
        let mut vals: Vec<f64> = (0..2 * 3 * 6 * 6).map(|i| i as f64 * 0.01).collect();
        use rand::seq::SliceRandom;
        vals.shuffle(&mut self.rng);
        let x = Tensor::from_vec(&[2, 3, 6, 6], vals.into_iter().map(T::from_f64_lossy).collect())?;
        let mut layer = MaxPool2d::new(2, 2);
        let r = randn::<T>(&mut self.rng, &layer.output_shape(x.shape())?);
        layer.forward(&x)?;
        let dx = layer.backward(&r)?;
        let n = numeric_grad(x.data(), self.opts.eps, |d| {
            Ok(project(&MaxPool2d::new(2, 2).forward(&with_data(&x, d))?, &r))
        })?;
        self.record("maxpool.input", to_f64(dx.data()), n);
        Ok(())
    }

    fn gap<T: Scalar>(&mut self) -> Result<()> {
        let x = randn::<T>(&mut self.rng, &[2, 3, 4, 5]);
        let r = randn::<T>(&mut self.rng, &[2, 3]);
        let mut layer = Gap::default();
        layer.forward(&x)?;
        let dx = layer.backward(&r)?;
        let n = numeric_grad(x.data(), self.opts.eps, |d| Ok(project(&Gap::apply(&with_data(&x, d))?, &r)))?;
        self.record("gap.input", to_f64(dx.data()), n);
        Ok(())
    }

    fn soft_labels(&mut self, n: usize, c: usize) -> Vec<SoftLabel> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| self.rng.random::<f64>() + 0.05).collect();
                let s: f64 = raw.iter().sum();
                SoftLabel::new(raw.into_iter().map(|v| v / s).collect()).expect("normalized")
            })
            .collect()
    }

    fn cross_entropy<T: Scalar>(&mut self) -> Result<()> {
        let logits = randn::<T>(&mut self.rng, &[4, 5]);
        let labels = self.soft_labels(4, 5);
        let a = softmax_cross_entropy(&logits, &labels)?;
        let n = numeric_grad(logits.data(), self.opts.eps, |d| {
            Ok(softmax_cross_entropy(&with_data(&logits, d), &labels)?.value.to_f64_lossy())
        })?;
        self.record("cross_entropy.logits", to_f64(a.grad.data()), n);
        Ok(())
    }

    fn kl<T: Scalar>(&mut self) -> Result<()> {
        let roi = randn::<T>(&mut self.rng, &[4, 5]);
        let hist = randn::<T>(&mut self.rng, &[4, 5]);
        let a = kl_consistency(&roi, &hist)?;
        let n = numeric_grad(roi.data(), self.opts.eps, |d| {
            Ok(kl_consistency(&with_data(&roi, d), &hist)?.value.to_f64_lossy())
        })?;
        self.record("kl_consistency.roi_logits", to_f64(a.grad.data()), n);
        Ok(())
    }

    fn random_roi(&mut self, image: usize, feature: usize) -> Result<RoiSpec> {
        let mut edge = || {
            let a = self.rng.random::<f64>();
            let b = self.rng.random::<f64>();
            (a.min(b), a.max(b).max(a.min(b) + 0.05).min(1.0))
        };
        let (x1, x2) = edge();
        let (y1, y2) = edge();
        RoiSpec::new((x1, y1, x2, y2), (image, image), feature as f64 / image as f64, 2)
    }

    fn roi_align<T: Scalar>(&mut self) -> Result<()> {
        let fmap = randn::<T>(&mut self.rng, &[2, 3, 6, 6]);
        let roi = self.random_roi(24, 6)?;
        let r = randn::<T>(&mut self.rng, &[2, 3]);
        let a = roi_align_batch_backward(fmap.shape(), &roi, &r)?;
        let n = numeric_grad(fmap.data(), self.opts.eps, |d| {
            Ok(project(&roi_align_batch(&with_data(&fmap, d), &roi)?, &r))
        })?;
        self.record("roi_align.feature_map", to_f64(a.data()), n);
        Ok(())
    }

    /// Consistency path: feature map → RoIAlign → auxiliary head → weighted KL.
    fn consistency_path<T: Scalar>(&mut self) -> Result<()> {
        let fmap = randn::<T>(&mut self.rng, &[2, 4, 4, 4]);
        let roi = self.random_roi(16, 4)?;
        let mut head = Linear::<T>::zeros(4, 3);
        head.weight = randn(&mut self.rng, &[3, 4]);
        head.bias = randn(&mut self.rng, &[3]);
        let gap_logits = randn::<T>(&mut self.rng, &[2, 3]);
        let hist = randn::<T>(&mut self.rng, &[2, 3]);
        let labels = self.soft_labels(2, 3);
        let (lambda, omega) = (0.3, 0.7);
        let loss_of = |f: &Tensor<T>, h: &Linear<T>| -> Result<f64> {
            let roi_logits = h.apply(&roi_align_batch(f, &roi)?)?;
            Ok(total_loss(&gap_logits, &labels, Some(&roi_logits), Some(&hist), lambda, omega)?.terms.total)
        };
        let pooled = roi_align_batch(&fmap, &roi)?;
        let tl = total_loss(&gap_logits, &labels, Some(&head.apply(&pooled)?), Some(&hist), lambda, omega)?;
        let mut probe = head.clone();
        let d_pooled = probe.backward_from(&pooled, tl.grad_roi_logits.as_ref().expect("branch active"))?;
        let d_fmap = roi_align_batch_backward(fmap.shape(), &roi, &d_pooled)?;
        let n = numeric_grad(fmap.data(), self.opts.eps, |d| loss_of(&with_data(&fmap, d), &head))?;
        self.record("consistency.feature_map", to_f64(d_fmap.data()), n);
        let n = numeric_grad(head.weight.data(), self.opts.eps, |d| {
            let mut h = head.clone();
            h.weight = with_data(&head.weight, d);
            loss_of(&fmap, &h)
        })?;
        self.record("consistency.aux_head.weight", to_f64(probe.weight.grad().unwrap()), n);
        Ok(())
    }

    /// Whole network (conv, relu, pool, conv, relu, GAP, head) under cross-entropy.
    fn network<T: Scalar>(&mut self) -> Result<()> {
        let mut init = ChaCha8Rng::seed_from_u64(self.opts.seed ^ 0xA11);
        let backbone = vec![
            Layer::Conv2d(Conv2d::new(3, 4, 3, 1, 1, &mut init)),
            Layer::relu(),
            Layer::maxpool(2, 2),
            Layer::Conv2d(Conv2d::new(4, 5, 3, 1, 1, &mut init)),
            Layer::relu(),
        ];
        let model = Network::new(backbone, Linear::new(5, 3, &mut init), None);
        let x = randn::<T>(&mut self.rng, &[2, 3, 6, 6]);
        let labels = self.soft_labels(2, 3);
        let mut probe = model.clone();
        probe.zero_grad();
        let out = probe.forward(&x)?;
        let ce = softmax_cross_entropy(&out.gap_logits, &labels)?;
        probe.backward(&ce.grad, None)?;
        let analytic: Vec<(String, Vec<f64>)> = probe
            .params()
            .into_iter()
            .map(|(name, p)| (name, to_f64(p.grad().unwrap())))
            .collect();
        for (idx, (name, grad)) in analytic.into_iter().enumerate() {
            let base = model.params()[idx].1.data().to_vec();
            let n = numeric_grad(&base, self.opts.eps, |d| {
                let mut m = model.clone();
                m.params_mut()[idx].1.data_mut().copy_from_slice(d);
                Ok(softmax_cross_entropy(&m.forward(&x)?.gap_logits, &labels)?.value.to_f64_lossy())
            })?;
            self.record(&format!("network.{name}"), grad, n);
        }
        Ok(())
    }
}

/// Runs every check in precision `T`.
pub fn run_suite<T: Scalar>(opts: SuiteOptions) -> Result<GradReport> {
    let mut suite = Suite {
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        opts,
        checks: Vec::new(),
    };
    suite.conv::<T>("conv2d", 1, 1)?;
    suite.conv::<T>("conv2d_stride2", 2, 0)?;
    suite.linear::<T>()?;
    suite.relu::<T>()?;
    suite.maxpool::<T>()?;
    suite.gap::<T>()?;
    suite.cross_entropy::<T>()?;
    suite.kl::<T>()?;
    suite.roi_align::<T>()?;
    suite.consistency_path::<T>()?;
    suite.network::<T>()?;
    Ok(GradReport {
        precision: if std::mem::size_of::<T>() == 8 { "f64" } else { "f32" },
        checks: suite.checks,
    })
}
