//! Binary PGM (P5) heatmap export.
//!
//! Values are min-max scaled to 0..=255 with `round(255 * (v - min) /
//! (max - min))`; a constant map (min == max) exports as all zeros. The
//! byte stream depends only on the input values, so exports are
//! bit-exact across platforms.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Min-max scale to bytes; ties at .5 round away from zero (all values
/// are non-negative here, so effectively upward).
pub fn normalize_to_bytes(values: &[f32]) -> Vec<u8> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v as f64);
        max = max.max(v as f64);
    }
    if max <= min {
        return vec![0u8; values.len()];
    }
    let scale = 255.0 / (max - min);
    values
        .iter()
        .map(|&v| ((v as f64 - min) * scale).round() as u8)
        .collect()
}

/// Writes an h x w map as binary PGM with maxval 255.
pub fn write_pgm(path: &Path, h: usize, w: usize, values: &[f32]) -> Result<()> {
    if values.len() != h * w {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a {h} x {w} image",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(h * w + 32);
    write!(out, "P5\n{w} {h}\n255\n").expect("in-memory write");
    out.extend(normalize_to_bytes(values));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
