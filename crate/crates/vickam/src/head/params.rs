//! Parameter storage for the trainable head.
//!
//! Parameters live in f64 while training (all gradient math is 64-bit)
//! and are rounded to f32 only when written to checkpoint TensorFiles.
//! Blocks sit in a fixed order so accumulation, Adam updates, and
//! checkpoints are deterministic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{read_tensor, write_tensor, Tensor};

use super::SemanticTable;

/// Shape parameters shared by every head component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadDims {
    pub k_g: usize,
    pub k_a: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    /// Encoder width D.
    pub d_feat: usize,
    /// Semantic embedding width d.
    pub d_sem: usize,
    /// Prototype side p (stage-1 action classifier input is p*p*C).
    pub p: usize,
}

impl HeadDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_g, self.k_a, self.h, self.w, self.c, self.d_feat, self.d_sem, self.p,
        ];
        if all.contains(&0) {
            return Err(Error::InvalidConfig(format!("zero head dimension: {self:?}")));
        }
        Ok(())
    }
}

/// One named parameter block.
#[derive(Debug, Clone)]
pub struct ParamBlock {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
    /// Frozen blocks keep zero moments and are never updated.
    pub frozen: bool,
}

impl ParamBlock {
    fn new(name: &'static str, dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        ParamBlock {
            name,
            dims,
            data,
            frozen: false,
        }
    }
}

pub const BLOCK_NAMES: [&str; 13] = [
    "w_gs", "b_gs", "e1_w", "e1_b", "e2_w", "e2_b", "int_w", "int_b", "go_w", "go_b", "act_w",
    "act_b", "y",
];

/// All trainable weights of both stages.
#[derive(Debug, Clone)]
pub struct HeadParams {
    pub dims: HeadDims,
    blocks: Vec<ParamBlock>,
    /// When true the "y" block receives gradient; otherwise it is frozen
    /// at the seeded semantic table.
    pub train_y: bool,
}

/// Gradients aligned with `HeadParams::blocks`.
pub type Grads = Vec<Vec<f64>>;

fn uniform_block(name: &'static str, dims: Vec<usize>, fan_in: usize, seed: u64) -> ParamBlock {
    let numel: usize = dims.iter().product();
    let scale = 1.0 / (fan_in as f64).sqrt();
    let sub = rng::derive_seed(seed, rng::fnv1a(name.as_bytes()));
    let data = (0..numel)
        .map(|i| scale * rng::uniform_sym(sub, i as u64))
        .collect();
    ParamBlock::new(name, dims, data)
}

fn zero_block(name: &'static str, dims: Vec<usize>) -> ParamBlock {
    let numel = dims.iter().product();
    ParamBlock::new(name, dims, vec![0.0; numel])
}

impl HeadParams {
    /// Seeded initialization: weights uniform over
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero, semantic rows
    /// copied from `semantic`.
    pub fn init(dims: HeadDims, seed: u64, semantic: &SemanticTable) -> Result<Self> {
        dims.validate()?;
        if semantic.num_labels() != dims.k_a || semantic.dim() != dims.d_sem {
            return Err(Error::ShapeMismatch(format!(
                "semantic table {} x {} does not match K_a={} d={}",
                semantic.num_labels(),
                semantic.dim(),
                dims.k_a,
                dims.d_sem
            )));
        }
        let hw = dims.h * dims.w;
        let ppc = dims.p * dims.p * dims.c;
        let mut blocks = vec![
            uniform_block("w_gs", vec![dims.k_g, dims.c], dims.c, seed),
            zero_block("b_gs", vec![dims.k_g]),
            uniform_block("e1_w", vec![dims.d_feat, hw], hw, seed),
            zero_block("e1_b", vec![dims.d_feat]),
            uniform_block(
                "e2_w",
                vec![dims.d_feat, dims.d_feat + dims.d_sem],
                dims.d_feat + dims.d_sem,
                seed,
            ),
            zero_block("e2_b", vec![dims.d_feat]),
            uniform_block(
                "int_w",
                vec![dims.d_feat, dims.k_a * dims.d_feat],
                dims.k_a * dims.d_feat,
                seed,
            ),
            zero_block("int_b", vec![dims.d_feat]),
            uniform_block(
                "go_w",
                vec![dims.k_g, dims.k_g * dims.d_feat],
                dims.k_g * dims.d_feat,
                seed,
            ),
            zero_block("go_b", vec![dims.k_g]),
            uniform_block("act_w", vec![dims.k_a, ppc], ppc, seed),
            zero_block("act_b", vec![dims.k_a]),
        ];
        let y_data: Vec<f64> = semantic.table().data().iter().map(|&v| v as f64).collect();
        let mut y = ParamBlock::new("y", vec![dims.k_a, dims.d_sem], y_data);
        y.frozen = !semantic.trainable();
        blocks.push(y);
        Ok(HeadParams {
            dims,
            blocks,
            train_y: semantic.trainable(),
        })
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn block(&self, name: &str) -> &ParamBlock {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .unwrap_or_else(|| panic!("unknown block {name}"))
    }

    pub fn block_index(&self, name: &str) -> usize {
        self.blocks
            .iter()
            .position(|b| b.name == name)
            .unwrap_or_else(|| panic!("unknown block {name}"))
    }

    /// Same shapes with replaced contents; used by the gradient checker.
    pub fn with_block_data(&self, data: &[Vec<f64>]) -> Self {
        assert_eq!(data.len(), self.blocks.len());
        let mut out = self.clone();
        for (b, d) in out.blocks.iter_mut().zip(data) {
            assert_eq!(b.data.len(), d.len());
            b.data.clone_from(d);
        }
        out
    }

    pub fn zero_grads(&self) -> Grads {
        self.blocks.iter().map(|b| vec![0.0; b.data.len()]).collect()
    }

    /// Writes one f32 TensorFile per block plus manifest.json.
    pub fn save(&self, dir: &Path, step: u64, config_hash: u64) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut shapes = Vec::new();
        for b in &self.blocks {
            let data: Vec<f32> = b.data.iter().map(|&v| v as f32).collect();
            write_tensor(&Tensor::new(&b.dims, data)?, &dir.join(format!("{}.vkt", b.name)))?;
            shapes.push(BlockShape {
                name: b.name.to_string(),
                dims: b.dims.clone(),
                frozen: b.frozen,
            });
        }
        let manifest = CheckpointManifest {
            dims: self.dims,
            blocks: shapes,
            step,
            config_hash: format!("{config_hash:016x}"),
            train_y: self.train_y,
        };
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Other(format!("serialize manifest: {e}")))?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    /// Loads a checkpoint directory; shapes must match the manifest.
    pub fn load(dir: &Path) -> Result<(Self, u64)> {
        let path = dir.join("manifest.json");
        let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: CheckpointManifest = serde_json::from_str(&body).map_err(|e| Error::Format {
            path: path.clone(),
            detail: format!("bad manifest: {e}"),
        })?;
        manifest.dims.validate()?;
        let mut blocks = Vec::new();
        for shape in &manifest.blocks {
            let name = BLOCK_NAMES
                .iter()
                .find(|&&n| n == shape.name)
                .ok_or_else(|| Error::Format {
                    path: path.clone(),
                    detail: format!("unknown block {:?}", shape.name),
                })?;
            let t = read_tensor(&dir.join(format!("{name}.vkt")))?;
            if t.dims() != shape.dims {
                return Err(Error::ShapeMismatch(format!(
                    "block {name} has dims {:?}, manifest says {:?}",
                    t.dims(),
                    shape.dims
                )));
            }
            blocks.push(ParamBlock {
                name,
                dims: shape.dims.clone(),
                data: t.data().iter().map(|&v| v as f64).collect(),
                frozen: shape.frozen,
            });
        }
        let params = HeadParams {
            dims: manifest.dims,
            blocks,
            train_y: manifest.train_y,
        };
        params.check_shapes()?;
        Ok((params, manifest.step))
    }

    /// Validates that block shapes are consistent with `dims`.
    pub fn check_shapes(&self) -> Result<()> {
        let d = &self.dims;
        let hw = d.h * d.w;
        let expect: &[(&str, Vec<usize>)] = &[
            ("w_gs", vec![d.k_g, d.c]),
            ("b_gs", vec![d.k_g]),
            ("e1_w", vec![d.d_feat, hw]),
            ("e1_b", vec![d.d_feat]),
            ("e2_w", vec![d.d_feat, d.d_feat + d.d_sem]),
            ("e2_b", vec![d.d_feat]),
            ("int_w", vec![d.d_feat, d.k_a * d.d_feat]),
            ("int_b", vec![d.d_feat]),
            ("go_w", vec![d.k_g, d.k_g * d.d_feat]),
            ("go_b", vec![d.k_g]),
            ("act_w", vec![d.k_a, d.p * d.p * d.c]),
            ("act_b", vec![d.k_a]),
            ("y", vec![d.k_a, d.d_sem]),
        ];
        for (name, dims) in expect {
            let found = self
                .blocks
                .iter()
                .find(|b| b.name == *name)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing block {name}")))?;
            if &found.dims != dims {
                return Err(Error::ShapeMismatch(format!(
                    "block {name} has dims {:?}, expected {dims:?}",
                    found.dims
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockShape {
    name: String,
    dims: Vec<usize>,
    #[serde(default)]
    frozen: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    dims: HeadDims,
    blocks: Vec<BlockShape>,
    step: u64,
    config_hash: String,
    train_y: bool,
}
