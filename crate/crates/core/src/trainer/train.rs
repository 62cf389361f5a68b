use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{DatasetKind, TrainConfig};
use super::eval::evaluate;
use super::metrics::{EpochMetrics, RunMetrics};
use crate::consistency::{head_forward, roi_align_batch, roi_align_batch_backward, roi_head_mut, total_loss, LossTerms, RoiSpec};
use crate::data::loader::assemble;
use crate::data::{epoch_order, load_cifar10_bin, make_synthetic, AugPolicy, BatchPlan, Dataset, Split};
use crate::error::{Error, Result};
use crate::label::SoftLabel;
use crate::mix::{cutmix_step, effective_class_count, mixup_step, recursive_mix_step, MixBox, MixMode, MixOutcome, MixState};
use crate::nn::{LrSchedule, Network, Sgd, Tensor};

/// Independent random streams derived from the run seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    AuxInit = 2,
    Augment = 3,
    Mix = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Everything an observer may inspect after one optimizer step.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub epoch: usize,
    pub iteration: usize,
    pub indices: &'a [usize],
    pub images: &'a Tensor<f32>,
    pub labels: &'a [SoftLabel],
    pub mix_box: Option<MixBox>,
    pub lambda: f64,
    /// Historical logits handed over by the mix step, paired with the pasted images.
    pub hist_logits: Option<&'a Tensor<f32>>,
    /// GAP-head logits of `images`, recorded as the next historical prediction.
    pub gap_logits: &'a Tensor<f32>,
    pub terms: LossTerms,
    pub eff_classes: f64,
    pub state: &'a MixState,
}

/// Hooks into the training loop. Returning an error aborts the run.
pub trait Observer {
    fn on_step(&mut self, _step: &StepRecord<'_>) -> Result<()> {
        Ok(())
    }

    fn on_epoch(&mut self, _row: &EpochMetrics) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

pub struct TrainOutcome {
    pub model: Network<f32>,
    pub metrics: RunMetrics,
}

/// Train and test splits for a config. CIFAR-10 errors are `Error::Data`.
pub fn load_datasets(config: &TrainConfig) -> Result<(Dataset, Dataset)> {
    match config.dataset {
        DatasetKind::Cifar10 => {
            if !config.data_dir.is_dir() {
                return Err(Error::Data {
                    path: config.data_dir.clone(),
                    message: "dataset directory not found".into(),
                });
            }
            load_cifar10_bin(&config.data_dir)
        }
        DatasetKind::Synthetic => {
            let train = make_synthetic(
                config.data_seed,
                config.synthetic_classes,
                config.synthetic_train_per_class,
                config.image_size,
            )?;
            let test = make_synthetic(
                config.data_seed ^ 0x7E57_7E57,
                config.synthetic_classes,
                config.synthetic_test_per_class,
                config.image_size,
            )?
            .with_split(Split::Test);
            Ok((train, test))
        }
    }
}

pub fn build_model(config: &TrainConfig, num_classes: usize) -> Network<f32> {
    let mut init = stream_rng(config.seed, Stream::Init);
    let mut aux = stream_rng(config.seed, Stream::AuxInit);
    Network::tiny_cnn(3, config.channels, num_classes, &mut init, config.uses_aux_head().then_some(&mut aux))
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let (train_set, test_set) = load_datasets(config)?;
    train_on(config, &train_set, &test_set, &mut ())
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// The training loop: per iteration mix, forward, loss, backward, SGD step,
/// then hand the fresh GAP logits to the history buffer.
pub fn train_on(config: &TrainConfig, train_set: &Dataset, test_set: &Dataset, observer: &mut dyn Observer) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.class_count != test_set.class_count {
        return Err(Error::InvalidArgument("train and test class counts differ".into()));
    }
    let (h, w) = train_set.image_size();
    let policy = if config.augment {
        AugPolicy::for_size(h.min(w))
    } else {
        AugPolicy::disabled()
    };
    let mix_config = config.mix_config();
    let mut model = build_model(config, train_set.class_count);
    let mut optimizer = Sgd::<f32>::new(config.base_lr, config.momentum, config.weight_decay);
    let schedule = LrSchedule {
        min_lr: config.min_lr,
        ..LrSchedule::new(config.base_lr, config.warmup_epochs, config.epochs)
    };
    let mut aug_rng = stream_rng(config.seed, Stream::Augment);
    let mut mix_rng = stream_rng(config.seed, Stream::Mix);
    let mut state = MixState::new();
    let mut metrics = RunMetrics::default();
    let mut iteration = 0usize;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let lr = schedule.lr_at(epoch as f64)?;
        let order = epoch_order(train_set.len(), config.seed, epoch);
        let plan = BatchPlan::new(&order, config.batch_size, config.drop_last);
        let (mut ce, mut kl, mut total, mut eff) = (0.0, 0.0, 0.0, 0.0);

        for indices in &plan.batches {
            let (images, labels) = assemble(train_set, indices, &policy, &mut aug_rng)?;
            let outcome = match config.mode {
                MixMode::RecursiveMix => recursive_mix_step(&mut state, &images, &labels, &mut mix_rng, &mix_config)?,
                MixMode::CutMix => cutmix_step(&images, &labels, &mut mix_rng, &mix_config)?,
                MixMode::Mixup => mixup_step(&images, &labels, &mut mix_rng, config.beta)?,
                MixMode::None => MixOutcome {
                    images,
                    labels,
                    mix_box: None,
                    lambda: 0.0,
                    hist_logits: None,
                },
            };

            model.zero_grad();
            let out = model.forward(&outcome.images)?;

            // consistency branch: RoI features of the pasted region vs. stored logits
            let omega = if config.uses_consistency() { config.omega } else { 0.0 };
            let roi_branch = match (&outcome.mix_box, &outcome.hist_logits) {
                (Some(b), Some(_)) if omega * outcome.lambda > 0.0 => {
                    let roi = RoiSpec::from_box(b, out.feature_map.shape()[3], config.sampling_ratio)?;
                    let pooled = roi_align_batch(&out.feature_map, &roi)?;
                    let logits = head_forward(&pooled, &model, config.shared_head)?;
                    Some((roi, pooled, logits))
                }
                _ => None,
            };
            let loss = total_loss(
                &out.gap_logits,
                &outcome.labels,
                roi_branch.as_ref().map(|r| &r.2),
                outcome.hist_logits.as_ref(),
                outcome.lambda,
                if roi_branch.is_some() { omega } else { 0.0 },
            )?;
            if !loss.terms.total.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    iteration,
                    indices: indices.clone(),
                });
            }

            let feature_grad = match (&roi_branch, &loss.grad_roi_logits) {
                (Some((roi, pooled, _)), Some(g)) => {
                    let d_pooled = roi_head_mut(&mut model, config.shared_head)?.backward_from(pooled, g)?;
                    Some(roi_align_batch_backward(out.feature_map.shape(), roi, &d_pooled)?)
                }
                _ => None,
            };
            model.backward(&loss.grad_logits, feature_grad.as_ref())?;
            {
                let mut params: Vec<&mut Tensor<f32>> = model.params_mut().into_iter().map(|(_, p)| p).collect();
                optimizer.step(&mut params, lr)?;
            }
            if config.mode == MixMode::RecursiveMix {
                state.record_logits(&out.gap_logits)?;
            }

            let batch_eff = effective_class_count(&outcome.labels, config.eff_threshold);
            observer.on_step(&StepRecord {
                epoch,
                iteration,
                indices,
                images: &outcome.images,
                labels: &outcome.labels,
                mix_box: outcome.mix_box,
                lambda: outcome.lambda,
                hist_logits: outcome.hist_logits.as_ref(),
                gap_logits: &out.gap_logits,
                terms: loss.terms,
                eff_classes: batch_eff,
                state: &state,
            })?;
            ce += loss.terms.ce;
            kl += loss.terms.kl;
            total += loss.terms.total;
            eff += batch_eff;
            iteration += 1;
        }

        let (top1, top5) = evaluate(&model, test_set, config.eval_batch_size)?;
        let batches = plan.batches.len();
        let row = EpochMetrics {
            epoch,
            lr,
            ce: mean(ce, batches),
            kl: mean(kl, batches),
            total: mean(total, batches),
            top1,
            top5,
            eff_classes: mean(eff, batches),
            seconds: if config.record_seconds {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        observer.on_epoch(&row)?;
        metrics.rows.push(row);
    }
    Ok(TrainOutcome { model, metrics })
}
