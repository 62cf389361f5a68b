//! Builds up RecursiveMix one component at a time on the synthetic dataset
//! and reports best and final top-1 error plus the mean effective class count:
//! plain training, history mixing with a crop, history mixing with
//! resize-fill, consistency through the shared head, and the full method with
//! an auxiliary head. CutMix and Mixup are included for reference.
//!
//! cargo run --release --example ablation_ladder -- [epochs]

use recursivemix::mix::{MixMode, ResizeStrategy};
use recursivemix::trainer::{load_datasets, track_effective_classes, train_on, DatasetKind, TrainConfig};

fn main() -> recursivemix::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let base = TrainConfig {
        mode: MixMode::RecursiveMix,
        dataset: DatasetKind::Synthetic,
        synthetic_classes: 12,
        synthetic_train_per_class: 32,
        synthetic_test_per_class: 16,
        image_size: 16,
        channels: [8, 16, 32],
        batch_size: 32,
        epochs,
        warmup_epochs: 1,
        base_lr: 0.05,
        ..TrainConfig::default()
    };
    let rows = [
        ("none", TrainConfig { mode: MixMode::None, ..base.clone() }),
        ("cutmix", TrainConfig { mode: MixMode::CutMix, ..base.clone() }),
        ("mixup", TrainConfig { mode: MixMode::Mixup, ..base.clone() }),
        ("history + crop", TrainConfig { resize_strategy: ResizeStrategy::Cut, consistency: false, ..base.clone() }),
        ("history + resize", TrainConfig { consistency: false, ..base.clone() }),
        ("+ consistency, shared head", TrainConfig { shared_head: true, ..base.clone() }),
        ("+ consistency, aux head", base.clone()),
    ];
    let (train, test) = load_datasets(&base)?;
    println!("{:<28} {:>8} {:>8} {:>6}", "variant", "best", "final", "eff");
    for (name, config) in rows {
        let run = train_on(&config, &train, &test, &mut ())?;
        let eff = track_effective_classes(&run.metrics);
        println!(
            "{name:<28} {:>7.2}% {:>7.2}% {:>6.2}",
            run.metrics.best_top1().unwrap_or(f64::NAN),
            run.metrics.final_top1().unwrap_or(f64::NAN),
            eff.iter().sum::<f64>() / eff.len() as f64
        );
    }
    Ok(())
}
