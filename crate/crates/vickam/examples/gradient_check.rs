//! Finite-difference verification of the head's analytic gradients.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use vickam::head::{
    backward_go, backward_gs, embed_labels, forward_go, forward_gs, grad_check, softmax_ce,
    HeadDims, HeadParams,
};
use vickam::pipeline::loss_main;
use vickam::rng::uniform_sym;

fn main() -> vickam::Result<()> {
    let dims = HeadDims {
        k_g: 3,
        k_a: 2,
        h: 4,
        w: 5,
        c: 2,
        d_feat: 4,
        d_sem: 3,
        p: 2,
    };
    let labels: Vec<String> = (0..dims.k_a).map(|k| format!("action_{k}")).collect();
    let mut table = embed_labels(&labels, dims.d_sem, 5)?;
    table.set_trainable(true);
    let params = HeadParams::init(dims, 17, &table)?;

    // Fixed single-sample batch.
    let mhat: Vec<f64> = (0..dims.k_g * dims.k_a * dims.h * dims.w)
        .map(|i| uniform_sym(900, i as u64))
        .collect();
    let pooled: Vec<f64> = (0..dims.c).map(|i| uniform_sym(901, i as u64)).collect();
    let (label, lambda) = (1usize, 3.0f64);

    let loss_fn = |p: &HeadParams| -> vickam::Result<f64> {
        let y = p.block("y").data.clone();
        let gs = forward_gs(p, &pooled);
        let go = forward_go(p, &mhat, &y);
        loss_main(&gs, &go.logits, label, lambda)
    };

    let mut analytic = params.zero_grads();
    let y = params.block("y").data.clone();
    let gs = forward_gs(&params, &pooled);
    let (_, dgs) = softmax_ce(&gs, label)?;
    backward_gs(&params, &pooled, &dgs, 1.0, &mut analytic);
    let trace = forward_go(&params, &mhat, &y);
    let (_, dgo) = softmax_ce(&trace.logits, label)?;
    backward_go(&params, &trace, &dgo, lambda, &mut analytic);

    let report = grad_check(loss_fn, &params, &analytic, 1e-5, 64, 0xC0DE)?;
    println!("block            coords   max rel err");
    for b in &report.per_block {
        println!("{:<16} {:>6}   {:.3e}", b.name, b.coords, b.max_rel_err);
    }
    println!(
        "\noverall: {} coordinates checked, max relative error {:.3e}",
        report.coords_checked, report.max_rel_err
    );
    Ok(())
}
