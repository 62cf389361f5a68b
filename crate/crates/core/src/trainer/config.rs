use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::MAX_SYNTHETIC_CLASSES;
use crate::error::{Error, Result};
use crate::mix::{Interpolation, MixConfig, MixMode, ResizeStrategy, EFFECTIVE_CLASS_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Cifar10,
}

/// Every knob of a training run. Serialized as a flat JSON object whose keys
/// are the field names; missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: MixMode,
    /// λ ∼ U[0, alpha] for recursive mixing.
    pub alpha: f64,
    /// Beta(beta, beta) for the CutMix / Mixup baselines.
    pub beta: f64,
    pub omega: f64,
    /// When false the consistency branch (RoIAlign, KL, auxiliary head) is not built.
    pub consistency: bool,
    pub shared_head: bool,
    pub interpolation: Interpolation,
    pub resize_strategy: ResizeStrategy,
    pub sampling_ratio: usize,

    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub min_lr: f64,
    pub seed: u64,

    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    /// Seed of the synthetic dataset; independent of the training seed.
    pub data_seed: u64,
    pub synthetic_classes: usize,
    pub synthetic_train_per_class: usize,
    pub synthetic_test_per_class: usize,
    /// Side length of synthetic images (CIFAR-10 is always 32).
    pub image_size: usize,
    pub channels: [usize; 3],
    pub augment: bool,
    pub drop_last: bool,
    pub eval_batch_size: usize,
    pub eff_threshold: f64,

    pub output_dir: PathBuf,
    /// Write wall-clock seconds into the metrics CSV (0 when disabled).
    pub record_seconds: bool,
    /// Drop the auxiliary RoI head from the saved checkpoint.
    pub deploy_checkpoint: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: MixMode::RecursiveMix,
            alpha: 0.5,
            beta: 1.0,
            omega: crate::consistency::DEFAULT_OMEGA,
            consistency: true,
            shared_head: false,
            interpolation: Interpolation::Nearest,
            resize_strategy: ResizeStrategy::Resize,
            sampling_ratio: crate::consistency::DEFAULT_SAMPLING_RATIO,
            epochs: 200,
            batch_size: 128,
            base_lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            warmup_epochs: 5,
            min_lr: 0.0,
            seed: 0,
            dataset: DatasetKind::Cifar10,
            data_dir: PathBuf::from("data/cifar-10-batches-bin"),
            data_seed: 0,
            synthetic_classes: 4,
            synthetic_train_per_class: 100,
            synthetic_test_per_class: 50,
            image_size: 32,
            channels: [32, 64, 128],
            augment: true,
            drop_last: true,
            eval_batch_size: 256,
            eff_threshold: EFFECTIVE_CLASS_THRESHOLD,
            output_dir: PathBuf::from("runs/default"),
            record_seconds: true,
            deploy_checkpoint: true,
        }
    }
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl TrainConfig {
    pub fn mix_config(&self) -> MixConfig {
        MixConfig {
            alpha: self.alpha,
            beta: self.beta,
            mode: self.mode,
            interpolation: self.interpolation,
            resize_strategy: self.resize_strategy,
        }
    }

    /// Whether the RoI/KL branch is part of the model for this configuration.
    pub fn uses_consistency(&self) -> bool {
        self.mode == MixMode::RecursiveMix && self.consistency
    }

    /// Whether an auxiliary RoI head is constructed.
    pub fn uses_aux_head(&self) -> bool {
        self.uses_consistency() && !self.shared_head
    }

    pub fn image_extent(&self) -> usize {
        match self.dataset {
            DatasetKind::Cifar10 => 32,
            DatasetKind::Synthetic => self.image_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mix_config().validate()?;
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(bad("omega", format!("{} must be a finite non-negative number", self.omega)));
        }
        if self.sampling_ratio == 0 {
            return Err(bad("sampling_ratio", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(bad("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "must be at least 1"));
        }
        if self.eval_batch_size == 0 {
            return Err(bad("eval_batch_size", "must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(bad("base_lr", format!("{} must be positive", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(bad("momentum", format!("{} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(bad("weight_decay", format!("{} must be non-negative", self.weight_decay)));
        }
        if self.warmup_epochs > self.epochs {
            return Err(bad("warmup_epochs", format!("{} exceeds epochs {}", self.warmup_epochs, self.epochs)));
        }
        if !(0.0..=self.base_lr).contains(&self.min_lr) {
            return Err(bad("min_lr", format!("{} outside [0, base_lr]", self.min_lr)));
        }
        if !(1..=MAX_SYNTHETIC_CLASSES).contains(&self.synthetic_classes) {
            return Err(bad(
                "synthetic_classes",
                format!("{} outside 1..={MAX_SYNTHETIC_CLASSES}", self.synthetic_classes),
            ));
        }
        if self.synthetic_train_per_class == 0 || self.synthetic_test_per_class == 0 {
            return Err(bad("synthetic_train_per_class", "synthetic splits must be non-empty"));
        }
        if self.image_size < 8 || !self.image_size.is_multiple_of(4) {
            return Err(bad("image_size", format!("{} must be a multiple of 4, at least 8", self.image_size)));
        }
        if self.channels.contains(&0) {
            return Err(bad("channels", "every stage needs at least one channel"));
        }
        if !(self.eff_threshold > 0.0 && self.eff_threshold < 1.0) {
            return Err(bad("eff_threshold", format!("{} outside (0, 1)", self.eff_threshold)));
        }
        Ok(())
    }

    /// Sets one field from its textual form. Values are parsed as JSON when
    /// possible and as a bare string otherwise, so `mode=cutmix`,
    /// `alpha=0.3` and `channels=[8,16,32]` all work.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set_value(key, value)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> Result<()> {
        let mut map = match serde_json::to_value(&*self) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("config serializes to an object"),
        };
        if !map.contains_key(key) {
            return Err(bad(key, "unknown field"));
        }
        map.insert(key.to_string(), value);
        *self = serde_json::from_value(Value::Object(map)).map_err(|e| bad(key, e.to_string()))?;
        Ok(())
    }

    /// Parses a JSON object of overrides onto the defaults, naming the first
    /// offending key on error.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let map: Map<String, Value> = serde_json::from_str(text).map_err(|e| bad("<file>", e.to_string()))?;
        let mut config = TrainConfig::default();
        for (k, v) in map {
            config.set_value(&k, v)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}
