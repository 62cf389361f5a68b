//! Sweeps the mixing ratio bound alpha on the synthetic dataset, one run
//! directory per value, and prints the best error of each run.
//!
//! cargo run --release --example alpha_sweep -- [out_dir]

use std::path::PathBuf;

use recursivemix::cli::run_sweep;
use recursivemix::trainer::{DatasetKind, TrainConfig};

fn main() -> recursivemix::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/alpha_sweep".into()).into();
    let base = TrainConfig {
        dataset: DatasetKind::Synthetic,
        synthetic_classes: 8,
        synthetic_train_per_class: 32,
        image_size: 16,
        channels: [8, 16, 32],
        batch_size: 32,
        epochs: 6,
        warmup_epochs: 1,
        base_lr: 0.05,
        output_dir: out,
        ..TrainConfig::default()
    };
    for run in run_sweep(&base, &["alpha=0.1..0.9:0.2".to_string()], 1)? {
        let best = run.result?.best_top1().unwrap_or(f64::NAN);
        println!("alpha {:.1}: best top-1 error {best:.2}% ({})", run.config.alpha, run.dir.display());
    }
    Ok(())
}
