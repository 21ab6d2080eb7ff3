//! f64 forward and backward passes for both prediction paths.
//!
//! The go path, per activity g and action k (E1/E2 weights shared across
//! g and k, interaction layer shared across g):
//!
//! ```text
//! f_k = relu(E1 * flatten(Mhat[g, k]) + b1)
//! a_k = relu(E2 * concat(f_k, Y[k]) + b2)
//! O_g = W_int * concat(a_0 .. a_{K_a-1}) + b_int
//! logits_go = W_go * flatten(O) + b_go
//! ```
//!
//! The gs path is an average pool over (h, w) followed by one linear
//! layer. Backward routines accumulate into caller-provided gradient
//! buffers so batches can be averaged in a fixed order.

use super::params::{Grads, HeadParams};

#[inline]
fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[r] = acc;
    }
}

/// out += W^T * dy
#[inline]
fn matvec_t_accum(w: &[f64], rows: usize, cols: usize, dy: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let d = dy[r];
        if d == 0.0 {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(row) {
            *o += wv * d;
        }
    }
}

/// dw += dy (outer) x
#[inline]
fn outer_accum(dw: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    for r in 0..rows {
        let d = dy[r];
        if d == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (o, xv) in row.iter_mut().zip(x) {
            *o += d * xv;
        }
    }
}

#[inline]
fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Activations cached by the go-path forward pass, enough to backprop.
pub struct GoTrace {
    /// K_g * K_a * hw input copy (already f64).
    pub mhat: Vec<f64>,
    /// Post-relu encoder outputs, K_g * K_a * D each.
    pub f1: Vec<f64>,
    pub a2: Vec<f64>,
    /// E2 inputs, K_g * K_a * (D + d).
    pub cat2: Vec<f64>,
    /// Group representation, K_g * D.
    pub o: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Forward through the go path. `y` must be K_a * d; pass zeros to ablate
/// semantics. `mhat` is the K_g * K_a * h * w augmented stack.
pub fn forward_go(params: &HeadParams, mhat: &[f64], y: &[f64]) -> GoTrace {
    let d = &params.dims;
    let hw = d.h * d.w;
    let (kg, ka, df, ds) = (d.k_g, d.k_a, d.d_feat, d.d_sem);
    debug_assert_eq!(mhat.len(), kg * ka * hw);
    debug_assert_eq!(y.len(), ka * ds);

    let e1_w = &params.block("e1_w").data;
    let e1_b = &params.block("e1_b").data;
    let e2_w = &params.block("e2_w").data;
    let e2_b = &params.block("e2_b").data;
    let int_w = &params.block("int_w").data;
    let int_b = &params.block("int_b").data;
    let go_w = &params.block("go_w").data;
    let go_b = &params.block("go_b").data;

    let mut f1 = vec![0.0; kg * ka * df];
    let mut a2 = vec![0.0; kg * ka * df];
    let mut cat2 = vec![0.0; kg * ka * (df + ds)];
    let mut o = vec![0.0; kg * df];
    let mut z = vec![0.0; df];

    for g in 0..kg {
        for k in 0..ka {
            let m_gk = &mhat[(g * ka + k) * hw..(g * ka + k + 1) * hw];
            matvec(e1_w, df, hw, m_gk, &mut z);
            let f_gk = &mut f1[(g * ka + k) * df..(g * ka + k + 1) * df];
            for (f, (zv, bv)) in f_gk.iter_mut().zip(z.iter().zip(e1_b)) {
                *f = (zv + bv).max(0.0);
            }
            let c_gk = &mut cat2[(g * ka + k) * (df + ds)..(g * ka + k + 1) * (df + ds)];
            c_gk[..df].copy_from_slice(f_gk);
            c_gk[df..].copy_from_slice(&y[k * ds..(k + 1) * ds]);
            matvec(e2_w, df, df + ds, c_gk, &mut z);
            let a_gk = &mut a2[(g * ka + k) * df..(g * ka + k + 1) * df];
            for (a, (zv, bv)) in a_gk.iter_mut().zip(z.iter().zip(e2_b)) {
                *a = (zv + bv).max(0.0);
            }
        }
        let cat_int = &a2[g * ka * df..(g + 1) * ka * df];
        let o_g = &mut o[g * df..(g + 1) * df];
        matvec(int_w, df, ka * df, cat_int, o_g);
        add_assign(o_g, int_b);
    }

    let mut logits = vec![0.0; kg];
    matvec(go_w, kg, kg * df, &o, &mut logits);
    add_assign(&mut logits, go_b);

    GoTrace {
        mhat: mhat.to_vec(),
        f1,
        a2,
        cat2,
        o,
        logits,
    }
}

/// Backprop through the go path, accumulating `scale * dL/dtheta` into
/// `grads` (aligned with `params.blocks()`).
pub fn backward_go(
    params: &HeadParams,
    trace: &GoTrace,
    dlogits: &[f64],
    scale: f64,
    grads: &mut Grads,
) {
    let d = &params.dims;
    let hw = d.h * d.w;
    let (kg, ka, df, ds) = (d.k_g, d.k_a, d.d_feat, d.d_sem);

    let e1_w_i = params.block_index("e1_w");
    let e1_b_i = params.block_index("e1_b");
    let e2_w_i = params.block_index("e2_w");
    let e2_b_i = params.block_index("e2_b");
    let int_w_i = params.block_index("int_w");
    let int_b_i = params.block_index("int_b");
    let go_w_i = params.block_index("go_w");
    let go_b_i = params.block_index("go_b");
    let y_i = params.block_index("y");

    let dl: Vec<f64> = dlogits.iter().map(|&v| v * scale).collect();

    // Classifier.
    outer_accum(&mut grads[go_w_i], kg, kg * df, &dl, &trace.o);
    add_assign(&mut grads[go_b_i], &dl);
    let mut d_o = vec![0.0; kg * df];
    matvec_t_accum(&params.block("go_w").data, kg, kg * df, &dl, &mut d_o);

    let int_w = &params.block("int_w").data;
    let e2_w = &params.block("e2_w").data;

    let mut d_cat_int = vec![0.0; ka * df];
    let mut d_z2 = vec![0.0; df];
    let mut d_cat2 = vec![0.0; df + ds];
    let mut d_z1 = vec![0.0; df];

    for g in 0..kg {
        let d_og = &d_o[g * df..(g + 1) * df];
        let cat_int = &trace.a2[g * ka * df..(g + 1) * ka * df];
        outer_accum(&mut grads[int_w_i], df, ka * df, d_og, cat_int);
        add_assign(&mut grads[int_b_i], d_og);
        d_cat_int.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_accum(int_w, df, ka * df, d_og, &mut d_cat_int);

        for k in 0..ka {
            let gk = g * ka + k;
            let a_gk = &trace.a2[gk * df..(gk + 1) * df];
            for i in 0..df {
                d_z2[i] = if a_gk[i] > 0.0 { d_cat_int[k * df + i] } else { 0.0 };
            }
            let c_gk = &trace.cat2[gk * (df + ds)..(gk + 1) * (df + ds)];
            outer_accum(&mut grads[e2_w_i], df, df + ds, &d_z2, c_gk);
            add_assign(&mut grads[e2_b_i], &d_z2);
            d_cat2.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_accum(e2_w, df, df + ds, &d_z2, &mut d_cat2);

            // Semantic rows (gradient only applied when train_y).
            add_assign(
                &mut grads[y_i][k * ds..(k + 1) * ds],
                &d_cat2[df..],
            );

            let f_gk = &trace.f1[gk * df..(gk + 1) * df];
            for i in 0..df {
                d_z1[i] = if f_gk[i] > 0.0 { d_cat2[i] } else { 0.0 };
            }
            let m_gk = &trace.mhat[gk * hw..(gk + 1) * hw];
            outer_accum(&mut grads[e1_w_i], df, hw, &d_z1, m_gk);
            add_assign(&mut grads[e1_b_i], &d_z1);
        }
    }
}

/// Mean over (h, w) of each channel of an h*w*C grid.
pub fn global_pool(grid: &[f32], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut pooled = vec![0.0f64; c];
    for cell in grid.chunks_exact(c) {
        for (p, &v) in pooled.iter_mut().zip(cell) {
            *p += v as f64;
        }
    }
    let inv = 1.0 / (h * w) as f64;
    pooled.iter_mut().for_each(|p| *p *= inv);
    pooled
}

/// gs-path logits from a pooled feature vector.
pub fn forward_gs(params: &HeadParams, pooled: &[f64]) -> Vec<f64> {
    let d = &params.dims;
    let mut logits = vec![0.0; d.k_g];
    matvec(&params.block("w_gs").data, d.k_g, d.c, pooled, &mut logits);
    add_assign(&mut logits, &params.block("b_gs").data);
    logits
}

/// Accumulates gs-path gradients.
pub fn backward_gs(
    params: &HeadParams,
    pooled: &[f64],
    dlogits: &[f64],
    scale: f64,
    grads: &mut Grads,
) {
    let d = &params.dims;
    let w_i = params.block_index("w_gs");
    let b_i = params.block_index("b_gs");
    let dl: Vec<f64> = dlogits.iter().map(|&v| v * scale).collect();
    outer_accum(&mut grads[w_i], d.k_g, d.c, &dl, pooled);
    add_assign(&mut grads[b_i], &dl);
}

/// Stage-1 action classifier logits from a flattened p*p*C ROI feature.
pub fn forward_act(params: &HeadParams, feat: &[f64]) -> Vec<f64> {
    let d = &params.dims;
    let cols = d.p * d.p * d.c;
    let mut logits = vec![0.0; d.k_a];
    matvec(&params.block("act_w").data, d.k_a, cols, feat, &mut logits);
    add_assign(&mut logits, &params.block("act_b").data);
    logits
}

pub fn backward_act(
    params: &HeadParams,
    feat: &[f64],
    dlogits: &[f64],
    scale: f64,
    grads: &mut Grads,
) {
    let d = &params.dims;
    let cols = d.p * d.p * d.c;
    let w_i = params.block_index("act_w");
    let b_i = params.block_index("act_b");
    let dl: Vec<f64> = dlogits.iter().map(|&v| v * scale).collect();
    outer_accum(&mut grads[w_i], d.k_a, cols, &dl, feat);
    add_assign(&mut grads[b_i], &dl);
}
