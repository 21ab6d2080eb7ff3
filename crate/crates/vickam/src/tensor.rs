//! Dense rank-1..4 f32 tensors and the VKT1 on-disk format.
//!
//! Layout is row-major with the last index fastest; the channel axis of
//! feature grids is last (h, w, C) so per-row channel runs are contiguous.
//! Tensors are immutable from the caller's perspective once built; ops
//! return new tensors.
//!
//! VKT1 file layout, byte-exact and independent of host endianness:
//!
//! ```text
//! magic   4 bytes  "VKT1"
//! rank    u8       1..=4
//! dims    rank x u32 little-endian
//! payload numel x f32 little-endian, row-major
//! ```
//!
//! Total size is `5 + 4*rank + 4*numel` bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

pub const MAGIC: [u8; 4] = *b"VKT1";
pub const MAX_RANK: usize = 4;

/// Fill distribution for [`seeded_fill`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    /// Uniform over `[-1, 1)`.
    Uniform,
    /// Gaussian with mean 0 and the given standard deviation.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, checking rank, extents, element count, and finiteness.
    pub fn new(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        Self::check_dims(dims)?;
        let numel: usize = dims.iter().product();
        if data.len() != numel {
            return Err(Error::ShapeMismatch(format!(
                "dims {:?} imply {} elements, got {}",
                dims,
                numel,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::check_dims(dims).expect("valid dims");
        let numel = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; numel],
        }
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(Error::ShapeMismatch(format!(
                "rank {} outside 1..={}",
                dims.len(),
                MAX_RANK
            )));
        }
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero extent in {dims:?}")));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::ShapeMismatch(format!("extent too large in {dims:?}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Linear offset of `[i, j]` in a rank-2 tensor.
    #[inline]
    pub fn idx2(&self, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.rank(), 2);
        i * self.dims[1] + j
    }

    /// Linear offset of `[i, j, k]` in a rank-3 tensor.
    #[inline]
    pub fn idx3(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert_eq!(self.rank(), 3);
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Linear offset of `[i, j, k, l]` in a rank-4 tensor.
    #[inline]
    pub fn idx4(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        debug_assert_eq!(self.rank(), 4);
        ((i * self.dims[1] + j) * self.dims[2] + k) * self.dims[3] + l
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> f32 {
        self.data[self.idx2(i, j)]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.idx3(i, j, k)]
    }

    #[inline]
    pub fn at4(&self, i: usize, j: usize, k: usize, l: usize) -> f32 {
        self.data[self.idx4(i, j, k, l)]
    }

    /// Exact equality of dims and payload bits (distinguishes -0.0 / 0.0).
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.dims == other.dims
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Deterministic fill: element `i` of the output depends only on
/// `(seed, dist, i)` via the counter-based generator in [`crate::rng`].
pub fn seeded_fill(dims: &[usize], seed: u64, dist: Dist) -> Tensor {
    Tensor::check_dims(dims).expect("valid dims");
    let numel: usize = dims.iter().product();
    let data: Vec<f32> = match dist {
        Dist::Uniform => (0..numel)
            .map(|i| rng::uniform_sym(seed, i as u64) as f32)
            .collect(),
        Dist::Gaussian { sigma } => (0..numel)
            .map(|i| (sigma * rng::gaussian(seed, i as u64)) as f32)
            .collect(),
    };
    Tensor {
        dims: dims.to_vec(),
        data,
    }
}

/// Writes `t` to `path` in the VKT1 layout.
pub fn write_tensor(t: &Tensor, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |buf: &[u8]| w.write_all(buf).map_err(|e| Error::io(path, e));
    emit(&MAGIC)?;
    emit(&[t.rank() as u8])?;
    for &d in t.dims() {
        emit(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        emit(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a VKT1 file back into a tensor; exact inverse of [`write_tensor`].
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, path, "header")?;
    if magic != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }

    let mut rank_byte = [0u8; 1];
    read_exact(&mut r, &mut rank_byte, path, "rank")?;
    let rank = rank_byte[0];
    if rank == 0 || rank as usize > MAX_RANK {
        return Err(Error::UnsupportedRank {
            path: path.into(),
            rank,
        });
    }

    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let mut b = [0u8; 4];
        read_exact(&mut r, &mut b, path, "dims")?;
        dims.push(u32::from_le_bytes(b) as usize);
    }
    if dims.contains(&0) {
        return Err(Error::Format {
            path: path.into(),
            detail: format!("zero extent in dims {dims:?}"),
        });
    }

    let numel: usize = dims.iter().product();
    let mut payload = vec![0u8; numel * 4];
    r.read_exact(&mut payload).map_err(|_| Error::SizeMismatch {
        path: path.into(),
        detail: format!("expected {} payload bytes", numel * 4),
    })?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::SizeMismatch {
            path: path.into(),
            detail: "trailing bytes after payload".into(),
        });
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor {
        dims,
        data,
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::SizeMismatch {
        path: path.into(),
        detail: format!("truncated {what}"),
    })
}
