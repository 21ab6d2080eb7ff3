//! Class-mean prototypes recover the generator templates from noisy data.
//!
//! ```bash
//! cargo run --example prototype_recovery
//! ```

use vickam::prototypes::{build_prototypes, cosine_similarity};
use vickam::synth::{gen_dataset, SynthConfig};

fn main() -> vickam::Result<()> {
    for (label, noise) in [("low noise", 0.05), ("heavy noise", 0.5)] {
        let cfg = SynthConfig {
            n_train: 120,
            n_test: 0,
            noise_sigma: noise,
            ..SynthConfig::standard_task(99)
        };
        let ds = gen_dataset(&cfg)?;
        let samples: Vec<_> = ds
            .train_annotated
            .iter()
            .map(|s| (s.features.clone(), s.annotations.clone()))
            .collect();
        let bank = build_prototypes(&samples, cfg.p, cfg.k_a, false)?;

        println!("{label} (sigma {noise}):");
        let len = cfg.p * cfg.p * cfg.c;
        for k in 0..cfg.k_a {
            let cos = cosine_similarity(
                bank.prototype(k).patch().data(),
                &ds.ground_truth.templates.data()[k * len..(k + 1) * len],
            );
            println!(
                "  action {k}: {} samples averaged, cosine to template {cos:.4}",
                bank.counts()[k]
            );
        }
    }
    Ok(())
}
