//! Writes successive mixed batches of the synthetic dataset as PPM files,
//! one directory per mixing mode, so the nested recursive patches can be
//! compared with CutMix and Mixup by eye.
//!
//! cargo run --release --example mix_preview -- [out_dir]

use std::path::PathBuf;

use recursivemix::cli::{run_preview, PreviewOptions};
use recursivemix::mix::MixMode;
use recursivemix::trainer::{DatasetKind, TrainConfig};

fn main() -> recursivemix::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/mix_preview".into()).into();
    let base = TrainConfig {
        dataset: DatasetKind::Synthetic,
        synthetic_classes: 8,
        image_size: 32,
        batch_size: 16,
        alpha: 0.8,
        ..TrainConfig::default()
    };
    for mode in [MixMode::RecursiveMix, MixMode::CutMix, MixMode::Mixup] {
        let dir = out.join(format!("{mode:?}").to_lowercase());
        let opts = PreviewOptions { count: 6, samples: 3, forced_lambda: None, out_dir: dir.clone() };
        let paths = run_preview(&TrainConfig { mode, ..base.clone() }, &opts)?;
        println!("{mode:?}: {} images in {}", paths.len(), dir.display());
    }
    Ok(())
}
