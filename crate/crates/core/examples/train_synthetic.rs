//! Trains TinyCNN on the synthetic shapes dataset with each mixing mode and
//! prints per-epoch metrics.
//!
//! cargo run --release --example train_synthetic -- [epochs]

use recursivemix::mix::MixMode;
use recursivemix::trainer::{load_datasets, train_on, DatasetKind, TrainConfig};

fn main() -> recursivemix::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let base = TrainConfig {
        dataset: DatasetKind::Synthetic,
        synthetic_classes: 4,
        synthetic_train_per_class: 64,
        synthetic_test_per_class: 32,
        image_size: 16,
        channels: [8, 16, 32],
        batch_size: 32,
        epochs,
        warmup_epochs: 1,
        base_lr: 0.05,
        record_seconds: true,
        ..TrainConfig::default()
    };
    let (train, test) = load_datasets(&base)?;
    for mode in [MixMode::None, MixMode::CutMix, MixMode::RecursiveMix] {
        let config = TrainConfig { mode, ..base.clone() };
        let run = train_on(&config, &train, &test, &mut ())?;
        println!("mode={mode:?}");
        print!("{}", run.metrics.to_csv());
    }
    Ok(())
}
