//! Bias-corrected Adam over the head's parameter blocks.

use crate::error::{Error, Result};

use super::params::{Grads, HeadParams};

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Grads,
    v: Grads,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with standard coefficients (beta1 0.9, beta2 0.999,
    /// eps 1e-8) and zero moments shaped like `params`.
    pub fn new(params: &HeadParams, lr: f64) -> Self {
        AdamState {
            m: params.zero_grads(),
            v: params.zero_grads(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam step: `theta -= lr * mhat / (sqrt(vhat) + eps)` with bias
/// correction. Frozen blocks are skipped.
pub fn adam_step(state: &mut AdamState, params: &mut HeadParams, grads: &Grads) -> Result<()> {
    if grads.len() != state.m.len() || grads.len() != params.blocks().len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} gradient blocks for {} parameter blocks",
            grads.len(),
            params.blocks().len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (bi, block) in params.blocks_mut().iter_mut().enumerate() {
        if block.frozen {
            continue;
        }
        let g = &grads[bi];
        if g.len() != block.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam: block {} has {} params but {} gradients",
                block.name,
                block.data.len(),
                g.len()
            )));
        }
        let m = &mut state.m[bi];
        let v = &mut state.v[bi];
        for i in 0..g.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            block.data[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}
