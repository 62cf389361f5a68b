//! Loads the CIFAR-10 binary distribution, prints split sizes and class
//! histograms, and exports the first few training images as PPM.
//!
//! cargo run --release --example cifar_loader -- <cifar-10-batches-bin dir> [out_dir]

use std::path::PathBuf;

use recursivemix::data::load_cifar10_bin;

fn main() -> recursivemix::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: cifar_loader <cifar-10-batches-bin dir> [out_dir]");
        std::process::exit(2);
    };
    let out: PathBuf = args.next().unwrap_or_else(|| "target/cifar_preview".into()).into();
    let (train, test) = load_cifar10_bin(&dir)?;
    println!("train {} images, test {} images", train.len(), test.len());
    println!("train histogram {:?}", train.class_histogram());
    println!("test histogram  {:?}", test.class_histogram());
    let paths = train.export_ppm(&out, 8)?;
    println!("exported {} images to {}", paths.len(), out.display());
    Ok(())
}
