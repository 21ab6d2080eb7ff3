//! Activity-action relation maps: spatial statistics of where each action
//! occurs under each activity.
//!
//! Each annotated individual contributes the r x r square of cells around
//! its transformed bottom-center point to the (activity, action) sub-map.
//! Transformed points are rounded to the nearest cell with ties toward
//! +infinity; squares are clipped at the grid border, and points whose
//! square misses the grid entirely are only counted in `skipped_points`.
//! Counts are integer-exact; normalized maps divide each (g, k) slice by
//! its maximum, so every slice with at least one stamp peaks at exactly 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototypes::BoxAnnotation;
use crate::tensor::{read_tensor, write_tensor, Tensor};

/// Row-major 2x3 affine map from sample coordinates to the uniform view,
/// (x, y) -> (a*x + b*y + tx, c*x + d*y + ty), in grid-cell units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub c: f64,
    pub d: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub fn identity() -> Self {
        AffineTransform {
            a: 1.0,
            b: 0.0,
            tx: 0.0,
            c: 0.0,
            d: 1.0,
            ty: 0.0,
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineTransform {
            a: 1.0,
            b: 0.0,
            tx,
            c: 0.0,
            d: 1.0,
            ty,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.a, self.b, self.tx, self.c, self.d, self.ty];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine transform".into()));
        }
        if self.a * self.d - self.b * self.c == 0.0 {
            return Err(Error::InvalidConfig("singular affine transform".into()));
        }
        Ok(())
    }
}

/// Image of a point under the transform.
pub fn apply_affine(t: &AffineTransform, pt: (f64, f64)) -> (f64, f64) {
    let (x, y) = pt;
    (t.a * x + t.b * y + t.tx, t.c * x + t.d * y + t.ty)
}

/// The bottom-center point of a box: ((x0+x1)/2, y1).
pub fn bottom_center(bbox: &BoxAnnotation) -> (f64, f64) {
    ((bbox.x0 + bbox.x1) / 2.0, bbox.y1)
}

/// Nearest integer with ties toward +infinity.
#[inline]
fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// One annotated training sample as seen by the stamper.
pub type AnnotatedSample = (usize, AffineTransform, Vec<BoxAnnotation>);

/// Normalized relation maps plus the raw integer counts they came from.
#[derive(Debug, Clone)]
pub struct RelationMaps {
    maps: Tensor,
    raw_counts: Vec<u32>,
    k_g: usize,
    k_a: usize,
    h: usize,
    w: usize,
    r: usize,
    skipped_points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RelMeta {
    #[serde(rename = "K_g")]
    k_g: usize,
    #[serde(rename = "K_a")]
    k_a: usize,
    h: usize,
    w: usize,
    r: usize,
    skipped_points: usize,
}

impl RelationMaps {
    pub fn k_g(&self) -> usize {
        self.k_g
    }

    pub fn k_a(&self) -> usize {
        self.k_a
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn marked_region(&self) -> usize {
        self.r
    }

    pub fn skipped_points(&self) -> usize {
        self.skipped_points
    }

    /// Normalized maps, K_g x K_a x h x w in [0, 1].
    pub fn maps(&self) -> &Tensor {
        &self.maps
    }

    pub fn raw_counts(&self) -> &[u32] {
        &self.raw_counts
    }

    /// The normalized h x w slice for (activity g, action k).
    pub fn slice(&self, g: usize, k: usize) -> &[f32] {
        let hw = self.h * self.w;
        let base = (g * self.k_a + k) * hw;
        &self.maps.data()[base..base + hw]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_tensor(&self.maps, &dir.join("relmaps.vkt"))?;
        let raw: Vec<f32> = self.raw_counts.iter().map(|&v| v as f32).collect();
        write_tensor(
            &Tensor::new(&[self.k_g, self.k_a, self.h, self.w], raw)?,
            &dir.join("raw_counts.vkt"),
        )?;
        let meta = RelMeta {
            k_g: self.k_g,
            k_a: self.k_a,
            h: self.h,
            w: self.w,
            r: self.r,
            skipped_points: self.skipped_points,
        };
        let path = dir.join("relmaps.json");
        let body = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Other(format!("serialize relmaps meta: {e}")))?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("relmaps.json");
        let body = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: RelMeta = serde_json::from_str(&body).map_err(|e| Error::Format {
            path: meta_path.clone(),
            detail: format!("bad relmaps meta: {e}"),
        })?;
        let maps = read_tensor(&dir.join("relmaps.vkt"))?;
        let raw = read_tensor(&dir.join("raw_counts.vkt"))?;
        let dims = [meta.k_g, meta.k_a, meta.h, meta.w];
        if maps.dims() != dims || raw.dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "relation map dims {:?}/{:?} disagree with meta {dims:?}",
                maps.dims(),
                raw.dims()
            )));
        }
        Ok(RelationMaps {
            maps,
            raw_counts: raw.data().iter().map(|&v| v as u32).collect(),
            k_g: meta.k_g,
            k_a: meta.k_a,
            h: meta.h,
            w: meta.w,
            r: meta.r,
            skipped_points: meta.skipped_points,
        })
    }
}

/// Accumulates relation maps from annotated samples.
pub fn stamp_relation_maps(
    annotated: &[AnnotatedSample],
    k_g: usize,
    k_a: usize,
    h: usize,
    w: usize,
    r: usize,
) -> Result<RelationMaps> {
    if r == 0 || r.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "marked region side must be odd and >= 1, got {r}"
        )));
    }
    if k_g == 0 || k_a == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidConfig("relation map extents must be >= 1".into()));
    }
    let hw = h * w;
    let mut raw = vec![0u32; k_g * k_a * hw];
    let mut skipped = 0usize;
    let half = (r / 2) as i64;
    for (g, transform, boxes) in annotated {
        if *g >= k_g {
            return Err(Error::LabelOutOfRange {
                index: *g,
                bound: k_g,
            });
        }
        transform.validate()?;
        for b in boxes {
            if b.action_id >= k_a {
                return Err(Error::LabelOutOfRange {
                    index: b.action_id,
                    bound: k_a,
                });
            }
            let (x, y) = apply_affine(transform, bottom_center(b));
            let u = round_half_up(x);
            let v = round_half_up(y);
            let row_lo = (v - half).max(0);
            let row_hi = (v + half).min(h as i64 - 1);
            let col_lo = (u - half).max(0);
            let col_hi = (u + half).min(w as i64 - 1);
            if row_lo > row_hi || col_lo > col_hi {
                skipped += 1;
                continue;
            }
            let base = (g * k_a + b.action_id) * hw;
            for i in row_lo..=row_hi {
                for j in col_lo..=col_hi {
                    raw[base + i as usize * w + j as usize] += 1;
                }
            }
        }
    }

    let mut maps = vec![0.0f32; raw.len()];
    for slice_idx in 0..k_g * k_a {
        let base = slice_idx * hw;
        let max = raw[base..base + hw].iter().copied().max().unwrap_or(0);
        if max > 0 {
            let inv = 1.0 / max as f64;
            for i in 0..hw {
                maps[base + i] = (raw[base + i] as f64 * inv) as f32;
            }
        }
    }

    Ok(RelationMaps {
        maps: Tensor::new(&[k_g, k_a, h, w], maps)?,
        raw_counts: raw,
        k_g,
        k_a,
        h,
        w,
        r,
        skipped_points: skipped,
    })
}
