//! Binary PPM (P6) read/write for previews and heatmaps.

use std::path::Path;

use super::ChannelStats;
use crate::error::{Error, Result};

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

pub fn write(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    debug_assert_eq!(rgb.len(), width * height * 3);
    std::fs::write(path, encode(width, height, rgb)).map_err(|e| Error::io(path, e))
}

/// Interleaved RGB bytes of a normalized planar `3×H×W` image.
pub fn image_bytes(image: &[f32], height: usize, width: usize, stats: &ChannelStats) -> Vec<u8> {
    let plane = height * width;
    let raw = stats.denormalize_image(image);
    (0..plane)
        .flat_map(|p| (0..3).map(move |c| (c, p)))
        .map(|(c, p)| to_byte(raw[c * plane + p]))
        .collect()
}

pub fn write_image(path: &Path, image: &[f32], height: usize, width: usize, stats: &ChannelStats) -> Result<()> {
    write(path, width, height, &image_bytes(image, height, width, stats))
}

/// Grayscale map with values in `[0, 1]`, written as P6 with equal channels.
pub fn write_gray(path: &Path, values: &[f32], height: usize, width: usize) -> Result<()> {
    let rgb: Vec<u8> = values.iter().flat_map(|&v| [to_byte(v); 3]).collect();
    write(path, width, height, &rgb)
}

/// Parses a P6 file with maxval 255; returns `(width, height, rgb)`.
pub fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::InvalidArgument(format!("malformed ppm: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?.to_string());
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad("expected P6 with maxval 255"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let data = &bytes[pos + 1..];
    if data.len() != width * height * 3 {
        return Err(bad("pixel data length"));
    }
    Ok((width, height, data.to_vec()))
}

pub fn read(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
