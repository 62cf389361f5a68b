//! Trains a small model on synthetic shapes, then writes class activation
//! maps for a few test images next to the images themselves.
//!
//! cargo run --release --example cam -- [out_dir]

use std::path::PathBuf;

use recursivemix::data::ppm;
use recursivemix::mix::MixMode;
use recursivemix::nn::Tensor;
use recursivemix::trainer::{emit_cam, load_datasets, train_on, DatasetKind, TrainConfig};

fn main() -> recursivemix::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/cam".into()).into();
    let config = TrainConfig {
        mode: MixMode::RecursiveMix,
        dataset: DatasetKind::Synthetic,
        synthetic_classes: 6,
        synthetic_train_per_class: 64,
        image_size: 32,
        channels: [8, 16, 32],
        batch_size: 32,
        epochs: 8,
        warmup_epochs: 1,
        base_lr: 0.05,
        ..TrainConfig::default()
    };
    let (train, test) = load_datasets(&config)?;
    let run = train_on(&config, &train, &test, &mut ())?;
    println!("final top-1 error {:.2}%", run.metrics.final_top1().unwrap_or(f64::NAN));
    std::fs::create_dir_all(&out).expect("create output directory");
    for i in 0..4 {
        let image = Tensor::from_vec(&[3, 32, 32], test.image(i).to_vec())?;
        let class = test.labels[i];
        let cam = emit_cam(&run.model, &image, class)?;
        ppm::write_image(&out.join(format!("image_{i}.ppm")), test.image(i), 32, 32, &test.stats)?;
        cam.write_ppm(&out.join(format!("cam_{i}_class_{class}.ppm")), 32, 32)?;
        println!("image {i}: class {class}, peak at cell {}", cam.argmax());
    }
    println!("wrote images and maps to {}", out.display());
    Ok(())
}
