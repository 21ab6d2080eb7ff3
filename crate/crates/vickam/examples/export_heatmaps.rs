//! PGM heatmap export for one sample: per-action maps plus every
//! activity-augmented sub-map.
//!
//! ```bash
//! cargo run --example export_heatmaps
//! ```

use vickam::fftcorr::gen_action_maps;
use vickam::head::augment;
use vickam::heatmap::write_pgm;
use vickam::pipeline::stage1_run;
use vickam::pipeline::TrainConfig;
use vickam::synth::{gen_dataset, SynthConfig};

fn main() -> vickam::Result<()> {
    let synth = SynthConfig {
        n_train: 60,
        n_test: 1,
        ..SynthConfig::standard_task(11)
    };
    let ds = gen_dataset(&synth)?;
    let mut cfg = TrainConfig::desk(synth.k_g, synth.k_a, synth.h, synth.w, synth.c, synth.p);
    cfg.epochs = 0; // knowledge extraction only
    cfg.seed = synth.seed;
    let knowledge = stage1_run(&ds.train_annotated, &cfg)?.knowledge;

    let sample = &ds.test[0];
    let maps = gen_action_maps(&sample.features, &knowledge.bank)?;
    let aug = augment(&maps, &knowledge.relmaps, true)?;

    let out = std::env::temp_dir().join("vickam_heatmaps");
    std::fs::create_dir_all(&out).expect("output dir");
    for k in 0..maps.num_actions() {
        write_pgm(
            &out.join(format!("action_{k}.pgm")),
            maps.h(),
            maps.w(),
            maps.map(k),
        )?;
    }
    let hw = maps.h() * maps.w();
    for g in 0..aug.k_g() {
        for k in 0..aug.k_a() {
            let base = (g * aug.k_a() + k) * hw;
            write_pgm(
                &out.join(format!("augmented_g{g}_a{k}.pgm")),
                maps.h(),
                maps.w(),
                &aug.maps().data()[base..base + hw],
            )?;
        }
    }
    println!(
        "wrote {} action maps and {} augmented sub-maps to {}",
        maps.num_actions(),
        aug.k_g() * aug.k_a(),
        out.display()
    );
    println!("(true activity of the sample: {})", sample.group_label);
    Ok(())
}
