//! Activity-action relation maps: stamping, normalization, and an ASCII
//! rendering of the resulting spatial statistics.
//!
//! ```bash
//! cargo run --example relation_maps
//! ```

use vickam::synth::{gen_dataset, SynthConfig};
use vickam::relmaps::stamp_relation_maps;

fn main() -> vickam::Result<()> {
    let cfg = SynthConfig {
        n_train: 160,
        n_test: 0,
        ..SynthConfig::hard_task(3)
    };
    let ds = gen_dataset(&cfg)?;
    let annotated: Vec<_> = ds
        .train_annotated
        .iter()
        .map(|s| (s.group_label, s.affine, s.annotations.clone()))
        .collect();
    let rel = stamp_relation_maps(&annotated, cfg.k_g, cfg.k_a, cfg.h, cfg.w, 5)?;
    println!(
        "stamped {} samples into {}x{} maps of {}x{} (marked region 5x5, skipped {})",
        annotated.len(),
        cfg.k_g,
        cfg.k_a,
        cfg.h,
        cfg.w,
        rel.skipped_points()
    );

    // The hard task places the same actions at different slots per
    // activity; compare where action 0 lives under activities 0 and 1.
    let shades = [' ', '.', ':', '+', '#'];
    for g in [0usize, 1] {
        println!("\nactivity {g}, action 0 (normalized density):");
        let slice = rel.slice(g, 0);
        for i in 0..cfg.h {
            let row: String = (0..cfg.w)
                .map(|j| {
                    let v = slice[i * cfg.w + j];
                    shades[((v * (shades.len() - 1) as f32).round() as usize)
                        .min(shades.len() - 1)]
                })
                .collect();
            println!("  |{row}|");
        }
    }
    Ok(())
}
