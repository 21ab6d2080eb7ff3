//! Central-difference gradient verification.

use crate::error::{Error, Result};
use crate::rng;

use super::params::{Grads, HeadParams};

/// Per-block worst relative error, plus the overall maximum.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_block: Vec<BlockReport>,
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub coords: usize,
    pub max_rel_err: f64,
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = (analytic.abs() + numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `loss_fn` on a
/// deterministic sample of at least `coords_per_block` coordinates per
/// non-frozen block (all coordinates when the block is smaller). Empty
/// parameter sets produce an empty report.
pub fn grad_check<F>(
    mut loss_fn: F,
    params: &HeadParams,
    analytic: &Grads,
    eps: f64,
    coords_per_block: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&HeadParams) -> Result<f64>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidConfig("grad_check eps must be > 0".into()));
    }
    let base = loss_fn(params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("grad_check loss".into()));
    }

    let mut work: Vec<Vec<f64>> = params.blocks().iter().map(|b| b.data.clone()).collect();
    let mut per_block = Vec::new();
    let mut max_rel = 0.0f64;
    let mut total = 0usize;

    for (bi, block) in params.blocks().iter().enumerate() {
        if block.frozen {
            continue;
        }
        let n = block.data.len();
        if n == 0 {
            per_block.push(BlockReport {
                name: block.name.to_string(),
                coords: 0,
                max_rel_err: 0.0,
            });
            continue;
        }
        let coords: Vec<usize> = if n <= coords_per_block {
            (0..n).collect()
        } else {
            // Deterministic sample without replacement.
            let mut idx: Vec<usize> = (0..n).collect();
            let mut stream = rng::Stream::new(rng::derive_seed(seed, bi as u64));
            stream.shuffle(&mut idx);
            idx.truncate(coords_per_block);
            idx
        };
        let mut block_max = 0.0f64;
        for &ci in &coords {
            let saved = work[bi][ci];
            work[bi][ci] = saved + eps;
            let plus = loss_fn(&params.with_block_data(&work))?;
            work[bi][ci] = saved - eps;
            let minus = loss_fn(&params.with_block_data(&work))?;
            work[bi][ci] = saved;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite("grad_check perturbed loss".into()));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let e = rel_err(analytic[bi][ci], numeric);
            block_max = block_max.max(e);
        }
        total += coords.len();
        max_rel = max_rel.max(block_max);
        per_block.push(BlockReport {
            name: block.name.to_string(),
            coords: coords.len(),
            max_rel_err: block_max,
        });
    }

    Ok(GradCheckReport {
        per_block,
        max_rel_err: max_rel,
        coords_checked: total,
    })
}
