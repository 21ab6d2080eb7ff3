//! Action maps by FFT cross-correlation against action prototypes.
//!
//! Generates one synthetic sample with known stamp locations, correlates
//! it against the generator templates, and checks that each action map
//! peaks where its action was actually stamped.
//!
//! ```bash
//! cargo run --example action_maps
//! ```

use vickam::fftcorr::{xcorr_fft, xcorr_naive, Prototype};
use vickam::synth::{gen_dataset, SynthConfig};
use vickam::Tensor;

fn main() -> vickam::Result<()> {
    let cfg = SynthConfig {
        n_train: 1,
        n_test: 0,
        noise_sigma: 0.02,
        ..SynthConfig::standard_task(7)
    };
    let ds = gen_dataset(&cfg)?;
    let sample = &ds.train_annotated[0];
    let stamps = &ds.ground_truth.train_stamps[0];
    println!(
        "sample: {}x{}x{} grid, activity {}, {} stamped instances",
        cfg.h, cfg.w, cfg.c, sample.group_label, stamps.len()
    );

    let len = cfg.p * cfg.p * cfg.c;
    for k in 0..cfg.k_a {
        let patch = Tensor::new(
            &[cfg.p, cfg.p, cfg.c],
            ds.ground_truth.templates.data()[k * len..(k + 1) * len].to_vec(),
        )?;
        let proto = Prototype::new(patch, k)?;
        let map = xcorr_fft(&sample.features, &proto)?;

        // The FFT backend must agree with the naive spatial oracle.
        let naive = xcorr_naive(&sample.features, &proto)?;
        let max_diff = map
            .data()
            .iter()
            .zip(naive.data())
            .fold(0.0f64, |m, (&a, &b)| m.max((a as f64 - b as f64).abs()));

        let mut best = (0, 0, f32::NEG_INFINITY);
        for i in 0..cfg.h {
            for j in 0..cfg.w {
                if map.at2(i, j) > best.2 {
                    best = (i, j, map.at2(i, j));
                }
            }
        }
        let truth: Vec<(usize, usize)> = stamps
            .iter()
            .filter(|s| s.action_id == k)
            .map(|s| (s.row, s.col))
            .collect();
        println!(
            "action {k}: map peak at ({}, {}) score {:.2}; true centers {:?}; |fft - naive| = {max_diff:.1e}",
            best.0, best.1, best.2, truth
        );
    }
    Ok(())
}
