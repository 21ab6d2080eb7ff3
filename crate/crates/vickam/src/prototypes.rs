//! Individual-feature extraction and class-mean action prototypes.
//!
//! ROI pooling divides an annotated box into p x p equal bins and samples
//! the feature grid bilinearly at each bin center (sampling ratio 1). A
//! grid cell (row, col) carries its value at the continuous point
//! (col + 0.5, row + 0.5), so a box exactly covering an integer-aligned
//! p x p block pools to that crop verbatim. Out-of-range samples clamp to
//! the border cells.
//!
//! Prototypes are arithmetic means of all pooled features per action
//! class. Contributions are pre-sorted by their f32 byte content and
//! accumulated in f64 in that fixed order, which makes the bank bit-exact
//! under any permutation of the input samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fftcorr::{FeatureMap, Prototype};
use crate::tensor::{read_tensor, write_tensor, Tensor};

/// One annotated individual: a box in feature-grid cell units plus the
/// action performed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub action_id: usize,
}

impl BoxAnnotation {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, action_id: usize) -> Result<Self> {
        let b = BoxAnnotation {
            x0,
            y0,
            x1,
            y1,
            action_id,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x0, self.y0, self.x1, self.y1];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("box coordinates".into()));
        }
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(Error::DegenerateBox(format!(
                "({}, {}, {}, {}) has no area",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        Ok(())
    }

    fn check_inside(&self, h: usize, w: usize) -> Result<()> {
        self.validate()?;
        if self.x0 < 0.0 || self.y0 < 0.0 || self.x1 > w as f64 || self.y1 > h as f64 {
            return Err(Error::ShapeMismatch(format!(
                "box ({}, {}, {}, {}) outside {h} x {w} grid",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        Ok(())
    }
}

/// Bilinear sample of channel values at the continuous point (x, y).
fn bilinear(grid: &Tensor, x: f64, y: f64, out: &mut [f64]) {
    let (h, w, c) = (grid.dims()[0], grid.dims()[1], grid.dims()[2]);
    let fy = y - 0.5;
    let fx = x - 0.5;
    let i0 = fy.floor();
    let j0 = fx.floor();
    let ty = fy - i0;
    let tx = fx - j0;
    let clamp = |v: f64, hi: usize| -> usize { (v.max(0.0) as usize).min(hi - 1) };
    let r0 = clamp(i0, h);
    let r1 = clamp(i0 + 1.0, h);
    let c0 = clamp(j0, w);
    let c1 = clamp(j0 + 1.0, w);
    let w00 = (1.0 - ty) * (1.0 - tx);
    let w01 = (1.0 - ty) * tx;
    let w10 = ty * (1.0 - tx);
    let w11 = ty * tx;
    let data = grid.data();
    let b00 = grid.idx3(r0, c0, 0);
    let b01 = grid.idx3(r0, c1, 0);
    let b10 = grid.idx3(r1, c0, 0);
    let b11 = grid.idx3(r1, c1, 0);
    for ch in 0..c {
        out[ch] = w00 * data[b00 + ch] as f64
            + w01 * data[b01 + ch] as f64
            + w10 * data[b10 + ch] as f64
            + w11 * data[b11 + ch] as f64;
    }
}

/// Pools the box into a p x p x C patch by bin-center bilinear sampling.
pub fn roi_pool(x: &FeatureMap, bbox: &BoxAnnotation, p: usize) -> Result<Tensor> {
    if p == 0 {
        return Err(Error::InvalidConfig("roi_pool resolution must be >= 1".into()));
    }
    bbox.check_inside(x.h(), x.w())?;
    let c = x.channels();
    let bin_w = (bbox.x1 - bbox.x0) / p as f64;
    let bin_h = (bbox.y1 - bbox.y0) / p as f64;
    let mut out = vec![0.0f32; p * p * c];
    let mut sample = vec![0.0f64; c];
    for i in 0..p {
        let cy = bbox.y0 + (i as f64 + 0.5) * bin_h;
        for j in 0..p {
            let cx = bbox.x0 + (j as f64 + 0.5) * bin_w;
            bilinear(x.grid(), cx, cy, &mut sample);
            let base = (i * p + j) * c;
            for ch in 0..c {
                out[base + ch] = sample[ch] as f32;
            }
        }
    }
    Tensor::new(&[p, p, c], out)
}

/// Class-mean prototypes for all K_a actions.
#[derive(Debug, Clone)]
pub struct PrototypeBank {
    prototypes: Tensor,
    counts: Vec<u64>,
    action_names: Vec<String>,
}

/// JSON sidecar stored next to the two tensor files.
#[derive(Debug, Serialize, Deserialize)]
struct BankMeta {
    #[serde(rename = "K_a")]
    k_a: usize,
    p: usize,
    #[serde(rename = "C")]
    c: usize,
    action_names: Vec<String>,
}

impl PrototypeBank {
    pub fn from_parts(prototypes: Tensor, counts: Vec<u64>, action_names: Vec<String>) -> Result<Self> {
        if prototypes.rank() != 4 || prototypes.dims()[1] != prototypes.dims()[2] {
            return Err(Error::ShapeMismatch(format!(
                "prototype bank must be K_a x p x p x C, got {:?}",
                prototypes.dims()
            )));
        }
        let k_a = prototypes.dims()[0];
        if counts.len() != k_a || action_names.len() != k_a {
            return Err(Error::ShapeMismatch(format!(
                "bank has {k_a} classes but {} counts / {} names",
                counts.len(),
                action_names.len()
            )));
        }
        Ok(PrototypeBank {
            prototypes,
            counts,
            action_names,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.prototypes.dims()[0]
    }

    pub fn side(&self) -> usize {
        self.prototypes.dims()[1]
    }

    pub fn channels(&self) -> usize {
        self.prototypes.dims()[3]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.prototypes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    /// The prototype for action `k` as a standalone patch.
    pub fn prototype(&self, k: usize) -> Prototype {
        let (p, c) = (self.side(), self.channels());
        let len = p * p * c;
        let patch = self.prototypes.data()[k * len..(k + 1) * len].to_vec();
        Prototype::new(Tensor::new(&[p, p, c], patch).expect("bank slice"), k)
            .expect("bank slice shape")
    }

    /// Writes prototypes.vkt, counts.vkt, and bank.json into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_tensor(&self.prototypes, &dir.join("prototypes.vkt"))?;
        let counts_f: Vec<f32> = self.counts.iter().map(|&c| c as f32).collect();
        write_tensor(
            &Tensor::new(&[self.num_actions()], counts_f)?,
            &dir.join("counts.vkt"),
        )?;
        let meta = BankMeta {
            k_a: self.num_actions(),
            p: self.side(),
            c: self.channels(),
            action_names: self.action_names.clone(),
        };
        let path = dir.join("bank.json");
        let body = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Other(format!("serialize bank meta: {e}")))?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("bank.json");
        let body = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: BankMeta = serde_json::from_str(&body).map_err(|e| Error::Format {
            path: meta_path.clone(),
            detail: format!("bad bank meta: {e}"),
        })?;
        let prototypes = read_tensor(&dir.join("prototypes.vkt"))?;
        let counts_t = read_tensor(&dir.join("counts.vkt"))?;
        if prototypes.dims() != [meta.k_a, meta.p, meta.p, meta.c] {
            return Err(Error::ShapeMismatch(format!(
                "prototypes.vkt dims {:?} disagree with bank.json ({}, {}, {}, {})",
                prototypes.dims(),
                meta.k_a,
                meta.p,
                meta.p,
                meta.c
            )));
        }
        let counts: Vec<u64> = counts_t.data().iter().map(|&v| v as u64).collect();
        Self::from_parts(prototypes, counts, meta.action_names)
    }
}

/// Lexicographic total order on the raw f32 content of two equal-length
/// feature vectors; the canonical accumulation order for averaging.
fn content_order(a: &[f32], b: &[f32]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Builds the class-mean bank from annotated samples.
///
/// Every class must receive at least one ROI unless `zero_fill` is set, in
/// which case missing classes get an all-zero prototype and a warning on
/// stderr.
pub fn build_prototypes(
    samples: &[(FeatureMap, Vec<BoxAnnotation>)],
    p: usize,
    k_a: usize,
    zero_fill: bool,
) -> Result<PrototypeBank> {
    if k_a == 0 {
        return Err(Error::InvalidConfig("K_a must be >= 1".into()));
    }
    let c = match samples.first() {
        Some((x, _)) => x.channels(),
        None if zero_fill => 0,
        None => return Err(Error::InvalidConfig("no samples and zero_fill disabled".into())),
    };
    let mut per_class: Vec<Vec<Vec<f32>>> = vec![Vec::new(); k_a];
    for (x, boxes) in samples {
        if x.channels() != c {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} channels, expected {c}",
                x.channels()
            )));
        }
        for b in boxes {
            if b.action_id >= k_a {
                return Err(Error::LabelOutOfRange {
                    index: b.action_id,
                    bound: k_a,
                });
            }
            per_class[b.action_id].push(roi_pool(x, b, p)?.into_data());
        }
    }

    let c = if c == 0 { 1 } else { c };
    let len = p * p * c;
    let mut data = vec![0.0f32; k_a * len];
    let mut counts = vec![0u64; k_a];
    for (k, mut feats) in per_class.into_iter().enumerate() {
        if feats.is_empty() {
            if !zero_fill {
                return Err(Error::EmptyClass { class: k });
            }
            eprintln!("warning: action class {k} has no samples; prototype zero-filled");
            continue;
        }
        feats.sort_by(|a, b| content_order(a, b));
        counts[k] = feats.len() as u64;
        let inv = 1.0 / feats.len() as f64;
        let mut acc = vec![0.0f64; len];
        for f in &feats {
            for (a, &v) in acc.iter_mut().zip(f) {
                *a += v as f64;
            }
        }
        for (i, a) in acc.iter().enumerate() {
            data[k * len + i] = (a * inv) as f32;
        }
    }

    let names = (0..k_a).map(|k| format!("action_{k}")).collect();
    PrototypeBank::from_parts(Tensor::new(&[k_a, p, p, c], data)?, counts, names)
}

/// Cosine similarity between two equal-length f32 slices (f64 internally).
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += (x as f64).powi(2);
        nb += (y as f64).powi(2);
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}
