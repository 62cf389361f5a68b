use std::path::Path;

use super::{ChannelStats, Dataset, Split, CIFAR10_STATS};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const RECORD_BYTES: usize = 1 + 3 * 32 * 32;
pub const RECORDS_PER_FILE: usize = 10_000;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// Decodes raw CIFAR-10 records (label byte, then 1024 R, 1024 G, 1024 B)
/// into normalized `3×32×32` images and labels.
pub fn decode_cifar_records(bytes: &[u8], stats: &ChannelStats) -> Result<(Vec<f32>, Vec<usize>)> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::InvalidArgument(format!(
            "{} bytes is not a whole number of {RECORD_BYTES}-byte records",
            bytes.len()
        )));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut images = Vec::with_capacity(n * (RECORD_BYTES - 1));
    let mut labels = Vec::with_capacity(n);
    for record in bytes.chunks_exact(RECORD_BYTES) {
        let label = record[0] as usize;
        if label >= 10 {
            return Err(Error::InvalidArgument(format!("label byte {label} outside 0..10")));
        }
        labels.push(label);
        for (i, &b) in record[1..].iter().enumerate() {
            images.push(stats.normalize(i / 1024, b as f32 / 255.0));
        }
    }
    Ok((images, labels))
}

/// Reads one CIFAR-10 batch file, which must hold exactly 10000 records.
pub fn read_cifar_batch(path: &Path, stats: &ChannelStats) -> Result<(Vec<f32>, Vec<usize>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        message: format!("cannot read: {e}"),
    })?;
    if bytes.len() != RECORDS_PER_FILE * RECORD_BYTES {
        return Err(Error::Data {
            path: path.to_path_buf(),
            message: format!(
                "expected {} bytes ({RECORDS_PER_FILE} records of {RECORD_BYTES}), found {}",
                RECORDS_PER_FILE * RECORD_BYTES,
                bytes.len()
            ),
        });
    }
    decode_cifar_records(&bytes, stats).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load_split(dir: &Path, files: &[&str], split: Split) -> Result<Dataset> {
    let mut images = Vec::with_capacity(files.len() * RECORDS_PER_FILE * (RECORD_BYTES - 1));
    let mut labels = Vec::with_capacity(files.len() * RECORDS_PER_FILE);
    for f in files {
        let (img, lab) = read_cifar_batch(&dir.join(f), &CIFAR10_STATS)?;
        images.extend(img);
        labels.extend(lab);
    }
    let n = labels.len();
    Dataset::new(Tensor::from_vec(&[n, 3, 32, 32], images)?, labels, 10, split, CIFAR10_STATS)
}

/// Loads the train (50000) and test (10000) splits from the binary distribution.
pub fn load_cifar10_bin(dir: &Path) -> Result<(Dataset, Dataset)> {
    // fail on any missing file before decoding anything
    for f in TRAIN_FILES.iter().chain(std::iter::once(&TEST_FILE)) {
        let p = dir.join(f);
        if !p.is_file() {
            return Err(Error::Data {
                path: p,
                message: "missing CIFAR-10 batch file".into(),
            });
        }
    }
    let train = load_split(dir, &TRAIN_FILES, Split::Train)?;
    let test = load_split(dir, &[TEST_FILE], Split::Test)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handcrafted_record() {
        let mut rec = vec![0u8; RECORD_BYTES];
        rec[0] = 7;
        rec[1] = 255; // first red pixel
        rec[1 + 1024] = 0; // first green pixel
        let (img, labels) = decode_cifar_records(&rec, &CIFAR10_STATS).unwrap();
        assert_eq!(labels, vec![7]);
        assert_eq!(img.len(), 3072);
        assert!((img[0] - (1.0 - 0.4914) / 0.2470).abs() < 1e-6);
        assert!((img[1024] - (0.0 - 0.4822) / 0.2435).abs() < 1e-6);
        assert!((img[2048] - (0.0 - 0.4465) / 0.2616).abs() < 1e-6);
    }

    #[test]
    fn wrong_length_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data_batch_1.bin");
        std::fs::write(&p, vec![0u8; RECORD_BYTES * 3]).unwrap();
        let err = read_cifar_batch(&p, &CIFAR10_STATS).unwrap_err();
        assert!(err.to_string().contains("data_batch_1.bin"));
    }

    #[test]
    fn missing_file_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_cifar10_bin(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
        assert!(err.to_string().contains("data_batch_1.bin"));
    }

    #[test]
    fn bad_label_byte_rejected() {
        let mut rec = vec![0u8; RECORD_BYTES];
        rec[0] = 12;
        assert!(decode_cifar_records(&rec, &CIFAR10_STATS).is_err());
    }
}
