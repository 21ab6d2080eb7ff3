//! Deterministic synthetic datasets with known ground truth.
//!
//! Each sample starts as gaussian background noise; action templates are
//! then stamped additively (superposition allowed) at positions drawn
//! from per-(activity, action) placement gaussians, truncated at 3 sigma
//! and clamped so the p x p box stays inside the grid. Boxes are exactly
//! p x p around each stamp, so ROI pooling at resolution p recovers the
//! template up to noise.
//!
//! The hard variant gives every activity the same multiset of action
//! counts, so spatially pooled channel statistics match across classes in
//! expectation and only spatial structure can separate them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fftcorr::FeatureMap;
use crate::prototypes::{cosine_similarity, BoxAnnotation};
use crate::relmaps::AffineTransform;
use crate::rng::{derive_seed, Stream};
use crate::tensor::{read_tensor, write_tensor, Tensor};

/// One placement gaussian: `count` instances at `(mean_x, mean_y)` with
/// per-axis deviation `std`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlacementSpec {
    pub mean_x: f64,
    pub mean_y: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthConfig {
    #[serde(rename = "K_g")]
    pub k_g: usize,
    #[serde(rename = "K_a")]
    pub k_a: usize,
    pub h: usize,
    pub w: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub p: usize,
    /// `placements[g][k]`: placement gaussians for action k under activity g.
    pub placements: Vec<Vec<Vec<PlacementSpec>>>,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(default)]
    pub hard_variant: bool,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_g == 0 || self.k_a == 0 || self.h == 0 || self.w == 0 || self.c == 0 {
            return Err(Error::InvalidConfig("all sizes must be >= 1".into()));
        }
        if self.p == 0 || self.p > self.h.min(self.w) {
            return Err(Error::InvalidConfig(format!(
                "p={} must satisfy 1 <= p <= min(h, w)",
                self.p
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if self.placements.len() != self.k_g
            || self.placements.iter().any(|a| a.len() != self.k_a)
        {
            return Err(Error::InvalidConfig(format!(
                "placements must be K_g x K_a lists, got {} x {:?}",
                self.placements.len(),
                self.placements.iter().map(|a| a.len()).collect::<Vec<_>>()
            )));
        }
        // Feasible center range keeps the p x p box inside the grid.
        let half = (self.p / 2) as f64;
        let (x_lo, x_hi) = (half, (self.w - 1) as f64 - half);
        let (y_lo, y_hi) = (half, (self.h - 1) as f64 - half);
        for (g, per_action) in self.placements.iter().enumerate() {
            for (k, specs) in per_action.iter().enumerate() {
                for s in specs {
                    if s.std < 0.0 || !s.std.is_finite() {
                        return Err(Error::InvalidConfig(format!(
                            "placement ({g},{k}): std must be >= 0"
                        )));
                    }
                    let r = 3.0 * s.std;
                    if s.mean_x - r < x_lo - 0.5
                        || s.mean_x + r > x_hi + 0.5
                        || s.mean_y - r < y_lo - 0.5
                        || s.mean_y + r > y_hi + 0.5
                    {
                        return Err(Error::InvalidConfig(format!(
                            "placement ({g},{k}) at ({}, {}) std {} leaves the grid after 3-sigma truncation",
                            s.mean_x, s.mean_y, s.std
                        )));
                    }
                }
            }
        }
        if self.hard_variant {
            let counts = |g: usize| -> Vec<usize> {
                (0..self.k_a)
                    .map(|k| self.placements[g][k].iter().map(|s| s.count).sum())
                    .collect()
            };
            let first = counts(0);
            for g in 1..self.k_g {
                if counts(g) != first {
                    return Err(Error::InvalidConfig(format!(
                        "hard_variant requires identical action multisets; activity {g} has {:?}, activity 0 has {first:?}",
                        counts(g)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Content- and position-separable 4-activity task used throughout
    /// the tests: 24 x 32 x 4 grid, 3 actions, p = 5.
    pub fn standard_task(seed: u64) -> SynthConfig {
        let spec = |x: f64, y: f64| PlacementSpec {
            mean_x: x,
            mean_y: y,
            std: 1.0,
            count: 1,
        };
        let placements = vec![
            // Activity 0: three action-0 stamps along the top, one action-1.
            vec![
                vec![spec(8.0, 6.0), spec(16.0, 6.0), spec(24.0, 6.0)],
                vec![spec(16.0, 12.0)],
                vec![],
            ],
            // Activity 1: three action-1 stamps along the bottom, one action-2.
            vec![
                vec![],
                vec![spec(8.0, 18.0), spec(16.0, 18.0), spec(24.0, 18.0)],
                vec![spec(16.0, 12.0)],
            ],
            // Activity 2: three action-2 stamps down the left, one action-0.
            vec![
                vec![spec(24.0, 12.0)],
                vec![],
                vec![spec(8.0, 6.0), spec(8.0, 12.0), spec(8.0, 18.0)],
            ],
            // Activity 3: one of each on the diagonal.
            vec![vec![spec(8.0, 6.0)], vec![spec(16.0, 12.0)], vec![spec(24.0, 18.0)]],
        ];
        SynthConfig {
            k_g: 4,
            k_a: 3,
            h: 24,
            w: 32,
            c: 4,
            p: 5,
            placements,
            noise_sigma: 0.05,
            n_train: 200,
            n_test: 100,
            seed,
            hard_variant: false,
        }
    }

    /// Hard variant: every activity stamps exactly two instances of each
    /// action; activities differ only in which of six well-separated
    /// slots each action occupies.
    pub fn hard_task(seed: u64) -> SynthConfig {
        let spec = |x: f64, y: f64| PlacementSpec {
            mean_x: x,
            mean_y: y,
            std: 1.0,
            count: 1,
        };
        // Slot grid: x in {8, 24}, y in {5, 12, 18}.
        let slots = [
            (8.0, 5.0),
            (8.0, 12.0),
            (8.0, 18.0),
            (24.0, 5.0),
            (24.0, 12.0),
            (24.0, 18.0),
        ];
        // Assignment of actions to slots per activity; each action takes
        // exactly two slots everywhere.
        let assign: [[usize; 6]; 4] = [
            [0, 1, 2, 0, 1, 2],
            [1, 2, 0, 1, 2, 0],
            [2, 0, 1, 2, 0, 1],
            [0, 2, 1, 1, 0, 2],
        ];
        let placements = assign
            .iter()
            .map(|row| {
                let mut per_action = vec![Vec::new(); 3];
                for (slot, &action) in slots.iter().zip(row.iter()) {
                    per_action[action].push(spec(slot.0, slot.1));
                }
                per_action
            })
            .collect();
        SynthConfig {
            k_g: 4,
            k_a: 3,
            h: 24,
            w: 32,
            c: 4,
            p: 5,
            placements,
            noise_sigma: 0.05,
            n_train: 200,
            n_test: 100,
            seed,
            hard_variant: true,
        }
    }
}

/// Fully annotated sample (stage-1 training only).
#[derive(Debug, Clone)]
pub struct Stage1Sample {
    pub features: FeatureMap,
    pub group_label: usize,
    pub annotations: Vec<BoxAnnotation>,
    pub affine: AffineTransform,
}

/// Group-label-only view; by construction it carries neither boxes nor
/// action labels, which is the annotation firewall for stage 2 and test.
#[derive(Debug, Clone)]
pub struct GroupOnlySample {
    pub features: FeatureMap,
    pub group_label: usize,
}

/// Where each instance was actually stamped (center cell), kept as
/// ground truth for peak/recovery checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StampRecord {
    pub action_id: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub templates: Tensor,
    pub activity_names: Vec<String>,
    pub action_names: Vec<String>,
    pub train_stamps: Vec<Vec<StampRecord>>,
    pub test_stamps: Vec<Vec<StampRecord>>,
}

#[derive(Debug)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub train_annotated: Vec<Stage1Sample>,
    pub test: Vec<GroupOnlySample>,
    pub ground_truth: GroundTruth,
}

impl SynthDataset {
    /// Group-only view of the training split.
    pub fn train_group_only(&self) -> Vec<GroupOnlySample> {
        self.train_annotated
            .iter()
            .map(|s| GroupOnlySample {
                features: s.features.clone(),
                group_label: s.group_label,
            })
            .collect()
    }
}

/// Seeded, mutually near-orthogonal templates (pairwise |cosine| <= 0.3).
pub fn gen_templates(k_a: usize, p: usize, c: usize, seed: u64) -> Result<Vec<Tensor>> {
    const MAX_TRIES: u64 = 500;
    if k_a == 0 || p == 0 || c == 0 {
        return Err(Error::InvalidConfig("template sizes must be >= 1".into()));
    }
    let mut out: Vec<Tensor> = Vec::with_capacity(k_a);
    let mut sub = 0u64;
    for k in 0..k_a {
        let mut accepted = None;
        for _ in 0..MAX_TRIES {
            let t = crate::tensor::seeded_fill(
                &[p, p, c],
                derive_seed(seed, 0x7E3D ^ sub),
                crate::tensor::Dist::Gaussian { sigma: 1.0 },
            );
            sub += 1;
            let ok = out
                .iter()
                .all(|prev| cosine_similarity(t.data(), prev.data()).abs() <= 0.3);
            if ok {
                accepted = Some(t);
                break;
            }
        }
        match accepted {
            Some(t) => out.push(t),
            None => {
                return Err(Error::Other(format!(
                    "could not find template {k} with pairwise |cos| <= 0.3 in {MAX_TRIES} tries"
                )))
            }
        }
    }
    Ok(out)
}

fn gen_sample(
    cfg: &SynthConfig,
    templates: &[Tensor],
    group: usize,
    sample_seed: u64,
) -> (FeatureMap, Vec<BoxAnnotation>, Vec<StampRecord>) {
    let (h, w, c, p) = (cfg.h, cfg.w, cfg.c, cfg.p);
    let mut stream = Stream::new(sample_seed);
    let mut grid = vec![0.0f64; h * w * c];
    if cfg.noise_sigma > 0.0 {
        for v in grid.iter_mut() {
            *v = cfg.noise_sigma * stream.next_gaussian();
        }
    }
    let mut annotations = Vec::new();
    let mut stamps = Vec::new();
    let half = p / 2;
    for (k, specs) in cfg.placements[group].iter().enumerate() {
        for spec in specs {
            for _ in 0..spec.count {
                let zx = stream.next_gaussian().clamp(-3.0, 3.0);
                let zy = stream.next_gaussian().clamp(-3.0, 3.0);
                let cx = spec.mean_x + spec.std * zx;
                let cy = spec.mean_y + spec.std * zy;
                let center_col = ((cx + 0.5).floor() as i64).clamp(half as i64, (w - 1 - half) as i64)
                    as usize;
                let center_row = ((cy + 0.5).floor() as i64).clamp(half as i64, (h - 1 - half) as i64)
                    as usize;
                let (r0, c0) = (center_row - half, center_col - half);
                let tmpl = &templates[k];
                for a in 0..p {
                    for b in 0..p {
                        for ch in 0..c {
                            let noise = if cfg.noise_sigma > 0.0 {
                                cfg.noise_sigma * stream.next_gaussian()
                            } else {
                                0.0
                            };
                            grid[((r0 + a) * w + (c0 + b)) * c + ch] +=
                                tmpl.at3(a, b, ch) as f64 + noise;
                        }
                    }
                }
                annotations.push(
                    BoxAnnotation::new(
                        c0 as f64,
                        r0 as f64,
                        (c0 + p) as f64,
                        (r0 + p) as f64,
                        k,
                    )
                    .expect("generated box"),
                );
                stamps.push(StampRecord {
                    action_id: k,
                    row: center_row,
                    col: center_col,
                });
            }
        }
    }
    let data: Vec<f32> = grid.iter().map(|&v| v as f32).collect();
    let features = FeatureMap::new(Tensor::new(&[h, w, c], data).expect("finite grid"))
        .expect("grid shape");
    (features, annotations, stamps)
}

/// Generates the full dataset: annotated train split, group-only test
/// split, and the ground-truth bundle.
pub fn gen_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let templates = gen_templates(cfg.k_a, cfg.p, cfg.c, derive_seed(cfg.seed, 0x7E31))?;
    let train_seed = derive_seed(cfg.seed, 1);
    let test_seed = derive_seed(cfg.seed, 2);

    let mut train = Vec::with_capacity(cfg.n_train);
    let mut train_stamps = Vec::with_capacity(cfg.n_train);
    for i in 0..cfg.n_train {
        let g = i % cfg.k_g;
        let (features, annotations, stamps) =
            gen_sample(cfg, &templates, g, derive_seed(train_seed, i as u64));
        train.push(Stage1Sample {
            features,
            group_label: g,
            annotations,
            affine: AffineTransform::identity(),
        });
        train_stamps.push(stamps);
    }

    let mut test = Vec::with_capacity(cfg.n_test);
    let mut test_stamps = Vec::with_capacity(cfg.n_test);
    for i in 0..cfg.n_test {
        let g = i % cfg.k_g;
        let (features, _, stamps) =
            gen_sample(cfg, &templates, g, derive_seed(test_seed, i as u64));
        test.push(GroupOnlySample {
            features,
            group_label: g,
        });
        test_stamps.push(stamps);
    }

    let mut tdata = Vec::with_capacity(cfg.k_a * cfg.p * cfg.p * cfg.c);
    for t in &templates {
        tdata.extend_from_slice(t.data());
    }
    let ground_truth = GroundTruth {
        templates: Tensor::new(&[cfg.k_a, cfg.p, cfg.p, cfg.c], tdata)?,
        activity_names: (0..cfg.k_g).map(|g| format!("activity_{g}")).collect(),
        action_names: (0..cfg.k_a).map(|k| format!("action_{k}")).collect(),
        train_stamps,
        test_stamps,
    };
    Ok(SynthDataset {
        config: cfg.clone(),
        train_annotated: train,
        test,
        ground_truth,
    })
}

// ---------------------------------------------------------------------------
// Directory layout
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SampleEntry {
    file: String,
    group_label: usize,
    affine: AffineTransform,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotations: Option<Vec<BoxAnnotation>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    config: SynthConfig,
    activity_names: Vec<String>,
    action_names: Vec<String>,
    train: Vec<SampleEntry>,
    test: Vec<SampleEntry>,
    train_stamps: Vec<Vec<StampRecord>>,
    test_stamps: Vec<Vec<StampRecord>>,
}

/// Writes manifest.json, ground_truth/templates.vkt, and one TensorFile
/// per sample grid under samples/.
pub fn save_dataset(ds: &SynthDataset, dir: &Path) -> Result<()> {
    let samples = dir.join("samples");
    std::fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
    let gt_dir = dir.join("ground_truth");
    std::fs::create_dir_all(&gt_dir).map_err(|e| Error::io(&gt_dir, e))?;
    write_tensor(&ds.ground_truth.templates, &gt_dir.join("templates.vkt"))?;

    let mut train_entries = Vec::new();
    for (i, s) in ds.train_annotated.iter().enumerate() {
        let file = format!("samples/train_{i:05}.vkt");
        write_tensor(s.features.grid(), &dir.join(&file))?;
        train_entries.push(SampleEntry {
            file,
            group_label: s.group_label,
            affine: s.affine,
            annotations: Some(s.annotations.clone()),
        });
    }
    let mut test_entries = Vec::new();
    for (i, s) in ds.test.iter().enumerate() {
        let file = format!("samples/test_{i:05}.vkt");
        write_tensor(s.features.grid(), &dir.join(&file))?;
        test_entries.push(SampleEntry {
            file,
            group_label: s.group_label,
            affine: AffineTransform::identity(),
            annotations: None,
        });
    }
    let manifest = DatasetManifest {
        config: ds.config.clone(),
        activity_names: ds.ground_truth.activity_names.clone(),
        action_names: ds.ground_truth.action_names.clone(),
        train: train_entries,
        test: test_entries,
        train_stamps: ds.ground_truth.train_stamps.clone(),
        test_stamps: ds.ground_truth.test_stamps.clone(),
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Other(format!("serialize dataset manifest: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::Format {
        path,
        detail: format!("bad dataset manifest: {e}"),
    })
}

/// Loads the annotated stage-1 training split. Errors if any training
/// sample lacks annotations.
pub fn load_stage1_split(dir: &Path) -> Result<Vec<Stage1Sample>> {
    let manifest = load_manifest(dir)?;
    let mut out = Vec::with_capacity(manifest.train.len());
    for entry in &manifest.train {
        let grid = read_tensor(&dir.join(&entry.file))?;
        let annotations = entry.annotations.clone().ok_or_else(|| Error::Format {
            path: dir.join("manifest.json"),
            detail: format!("training sample {} has no annotations", entry.file),
        })?;
        out.push(Stage1Sample {
            features: FeatureMap::new(grid)?,
            group_label: entry.group_label,
            annotations,
            affine: entry.affine,
        });
    }
    Ok(out)
}

/// Loads a split as group-only samples (the annotation firewall view).
pub fn load_group_split(dir: &Path, split: &str) -> Result<Vec<GroupOnlySample>> {
    let manifest = load_manifest(dir)?;
    let entries = match split {
        "train" => &manifest.train,
        "test" => &manifest.test,
        other => {
            return Err(Error::Usage(format!(
                "unknown split {other:?} (expected \"train\" or \"test\")"
            )))
        }
    };
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        let grid = read_tensor(&dir.join(&entry.file))?;
        out.push(GroupOnlySample {
            features: FeatureMap::new(grid)?,
            group_label: entry.group_label,
        });
    }
    Ok(out)
}

/// Names and sizes needed to wire a pipeline to a dataset directory.
pub fn load_dataset_meta(dir: &Path) -> Result<(SynthConfig, Vec<String>, Vec<String>)> {
    let manifest = load_manifest(dir)?;
    Ok((manifest.config, manifest.activity_names, manifest.action_names))
}

/// Ground-truth bundle (templates and stamp records).
pub fn load_ground_truth(dir: &Path) -> Result<GroundTruth> {
    let manifest = load_manifest(dir)?;
    let templates = read_tensor(&dir.join("ground_truth/templates.vkt"))?;
    Ok(GroundTruth {
        templates,
        activity_names: manifest.activity_names,
        action_names: manifest.action_names,
        train_stamps: manifest.train_stamps,
        test_stamps: manifest.test_stamps,
    })
}
