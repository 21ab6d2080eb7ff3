//! Acceptance suite: one test per criterion, each printing a
//! `[PASS] criterion N` line (run with `-- --nocapture` to see them).
//!
//! Every tolerance is pinned in code. Training-based criteria use the
//! bundled standard/hard synthetic tasks with known ground truth.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use vickam::fftcorr::{bench_corr, xcorr_fft, xcorr_naive, BenchConfig, FeatureMap, Prototype};
use vickam::head::{
    backward_act, backward_go, backward_gs, embed_labels, forward_act, forward_go, forward_gs,
    grad_check, softmax_ce, HeadDims, HeadParams,
};
use vickam::pipeline::{
    evaluate, loss_main, loss_pre, stage1_run, stage2_run, TrainConfig,
};
use vickam::prototypes::{cosine_similarity, BoxAnnotation};
use vickam::relmaps::{apply_affine, bottom_center, stamp_relation_maps, AffineTransform};
use vickam::rng::{derive_seed, Stream};
use vickam::synth::{gen_dataset, gen_templates, SynthConfig};
use vickam::tensor::{seeded_fill, Dist};

fn pass(line: &str) {
    println!("[PASS] {line}");
}

// ---------------------------------------------------------------------------
// 1. Correlation oracle equivalence over the size sweep
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_correlation_oracle_sweep() {
    let t0 = Instant::now();
    let mut sides: Vec<usize> = (5..=16).collect();
    sides.push(90);
    let mut cases = 0usize;
    let mut worst = 0.0f64;
    let mut check = |h: usize, w: usize, p: usize, c: usize| {
        let seed = derive_seed(0xACC1, (h * 1_000_000 + w * 1_000 + p * 10 + c) as u64);
        let x = FeatureMap::new(seeded_fill(&[h, w, c], seed, Dist::Uniform)).unwrap();
        let pk = Prototype::new(
            seeded_fill(&[p, p, c], derive_seed(seed, 1), Dist::Uniform),
            0,
        )
        .unwrap();
        let naive = xcorr_naive(&x, &pk).unwrap();
        let fft = xcorr_fft(&x, &pk).unwrap();
        let max_naive = naive
            .data()
            .iter()
            .fold(0.0f64, |m, &v| m.max((v as f64).abs()));
        let max_err = naive
            .data()
            .iter()
            .zip(fft.data())
            .fold(0.0f64, |m, (&a, &b)| m.max((a as f64 - b as f64).abs()));
        let rel = max_err / (1.0 + max_naive);
        assert!(
            rel <= 1e-6,
            "relative error {rel} at h={h} w={w} p={p} C={c}"
        );
        worst = worst.max(rel);
        cases += 1;
    };
    for &h in &sides {
        for &w in &sides {
            for &p in &[1usize, 3, 5, 7] {
                if p > h.min(w) {
                    continue;
                }
                for &c in &[1usize, 2, 8] {
                    check(h, w, p, c);
                }
            }
        }
    }
    // Paper-scale grid and prototype side, channels scaled to 8.
    check(90, 160, 7, 8);
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "sweep took {elapsed:?}, budget is 60 s"
    );
    pass(&format!(
        "criterion 1: FFT vs naive oracle over {cases} cases, worst rel err {worst:.2e} <= 1e-6, {elapsed:.1?} < 60 s"
    ));
}

// ---------------------------------------------------------------------------
// 2. Benchmark sanity
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_benchmark_sanity() {
    let t0 = Instant::now();
    let big = bench_corr(&BenchConfig {
        h: 90,
        w: 160,
        c: 8,
        p: 31,
        k_a: 1,
        repeats: 5,
        seed: 0xBE31,
    })
    .unwrap();
    let naive = big.iter().find(|r| r.backend == "naive").unwrap();
    let fft = big.iter().find(|r| r.backend == "fft").unwrap();
    assert!(naive.agreement && fft.agreement);
    let ratio = naive.median_ns as f64 / fft.median_ns as f64;
    assert!(
        ratio >= 2.0,
        "FFT speedup {ratio:.2}x at p=31 is below the required 2x"
    );

    let small = bench_corr(&BenchConfig {
        h: 90,
        w: 160,
        c: 8,
        p: 7,
        k_a: 1,
        repeats: 5,
        seed: 0xBE07,
    })
    .unwrap();
    assert_eq!(small.len(), 2);
    assert!(small.iter().all(|r| r.agreement && r.median_ns > 0));
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 120, "benchmark took {elapsed:?}");
    pass(&format!(
        "criterion 2: p=31 FFT speedup {ratio:.1}x >= 2x; p=7 both timed with agreement, {elapsed:.1?} < 2 min"
    ));
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness on tiny shapes
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_gradient_correctness() {
    let t0 = Instant::now();
    let dims = HeadDims {
        k_g: 2,
        k_a: 2,
        h: 4,
        w: 4,
        c: 2,
        d_feat: 3,
        d_sem: 2,
        p: 2,
    };
    let labels: Vec<String> = (0..2).map(|k| format!("action_{k}")).collect();
    let mut table = embed_labels(&labels, dims.d_sem, 77).unwrap();
    table.set_trainable(true);
    let params = HeadParams::init(dims, 0x6AAD, &table).unwrap();

    // Fixed two-sample batch for both loss paths.
    let hw = dims.h * dims.w;
    let mhat: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            (0..dims.k_g * dims.k_a * hw)
                .map(|j| vickam::rng::uniform_sym(100 + i, j as u64))
                .collect()
        })
        .collect();
    let pooled: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            (0..dims.c)
                .map(|j| vickam::rng::uniform_sym(200 + i, j as u64))
                .collect()
        })
        .collect();
    let rois: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            (0..dims.p * dims.p * dims.c)
                .map(|j| vickam::rng::uniform_sym(300 + i, j as u64))
                .collect()
        })
        .collect();
    let group_labels = [0usize, 1];
    let action_labels = [1usize, 0];
    let lambda_main = 3.0;
    let lambda_pre = 1.0;

    // Joint loss covering the gs path, the go path, and the stage-1
    // action classifier, averaged over the batch.
    let loss_fn = |p: &HeadParams| -> vickam::Result<f64> {
        let y = p.block("y").data.clone();
        let mut total = 0.0;
        for i in 0..2 {
            let logits_gs = forward_gs(p, &pooled[i]);
            let trace = forward_go(p, &mhat[i], &y);
            total += loss_main(&logits_gs, &trace.logits, group_labels[i], lambda_main)?;
            let logits_act = forward_act(p, &rois[i]);
            total += lambda_pre * softmax_ce(&logits_act, action_labels[i])?.0;
        }
        Ok(total / 2.0)
    };

    let mut analytic = params.zero_grads();
    {
        let y = params.block("y").data.clone();
        let scale = 1.0 / 2.0;
        for i in 0..2 {
            let logits_gs = forward_gs(&params, &pooled[i]);
            let (_, dgs) = softmax_ce(&logits_gs, group_labels[i]).unwrap();
            backward_gs(&params, &pooled[i], &dgs, scale, &mut analytic);
            let trace = forward_go(&params, &mhat[i], &y);
            let (_, dgo) = softmax_ce(&trace.logits, group_labels[i]).unwrap();
            backward_go(&params, &trace, &dgo, lambda_main * scale, &mut analytic);
            let logits_act = forward_act(&params, &rois[i]);
            let (_, dact) = softmax_ce(&logits_act, action_labels[i]).unwrap();
            backward_act(&params, &rois[i], &dact, lambda_pre * scale, &mut analytic);
        }
    }

    let report = grad_check(loss_fn, &params, &analytic, 1e-5, 64, 0x6C).unwrap();
    assert!(
        report.max_rel_err <= 1e-4,
        "max relative error {} across {} coords",
        report.max_rel_err,
        report.coords_checked
    );
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 30);
    pass(&format!(
        "criterion 3: grad check over {} blocks / {} coords, max rel err {:.2e} <= 1e-4, {elapsed:.1?} < 30 s",
        report.per_block.len(),
        report.coords_checked,
        report.max_rel_err
    ));
}

// ---------------------------------------------------------------------------
// 4. Prototype recovery
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_prototype_recovery() {
    let t0 = Instant::now();
    let seed = 0x9EC0;
    let mut synth = SynthConfig::standard_task(seed);
    // Noise pinned to 0.1 * RMS of the actual generator templates.
    let templates = gen_templates(synth.k_a, synth.p, synth.c, derive_seed(seed, 0x7E31)).unwrap();
    let rms: f64 = templates
        .iter()
        .map(|t| {
            (t.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / t.numel() as f64).sqrt()
        })
        .sum::<f64>()
        / templates.len() as f64;
    synth.noise_sigma = 0.1 * rms;
    synth.n_train = 200; // >= 100 instances per action class
    synth.n_test = 0;
    let ds = gen_dataset(&synth).unwrap();

    let mut per_class = vec![0usize; synth.k_a];
    for s in &ds.train_annotated {
        for b in &s.annotations {
            per_class[b.action_id] += 1;
        }
    }
    assert!(per_class.iter().all(|&n| n >= 100), "instances {per_class:?}");

    let samples: Vec<_> = ds
        .train_annotated
        .iter()
        .map(|s| (s.features.clone(), s.annotations.clone()))
        .collect();
    let bank =
        vickam::prototypes::build_prototypes(&samples, synth.p, synth.k_a, false).unwrap();
    let len = synth.p * synth.p * synth.c;
    let mut worst = 1.0f64;
    for k in 0..synth.k_a {
        let cos = cosine_similarity(
            bank.prototype(k).patch().data(),
            &ds.ground_truth.templates.data()[k * len..(k + 1) * len],
        );
        assert!(cos >= 0.95, "class {k}: cosine {cos}");
        worst = worst.min(cos);
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 60);
    pass(&format!(
        "criterion 4: prototype recovery at sigma = 0.1 RMS, {} instances/class, worst cosine {worst:.4} >= 0.95, {elapsed:.1?} < 1 min",
        per_class.iter().min().unwrap()
    ));
}

// ---------------------------------------------------------------------------
// 5. Relation-map counting oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_relation_map_counting_oracle() {
    let t0 = Instant::now();
    let (k_g, k_a, h, w, r) = (4usize, 3usize, 24usize, 32usize, 5usize);
    let mut annotated = Vec::new();
    let mut stream = Stream::new(0x5E1F);
    let mut total = 0usize;
    while total < 1000 {
        let g = stream.next_index(k_g);
        let t = AffineTransform::translation(
            (stream.next_unit() - 0.4) * 12.0,
            (stream.next_unit() - 0.4) * 12.0,
        );
        let mut boxes = Vec::new();
        for _ in 0..5.min(1000 - total) {
            let x0 = stream.next_unit() * (w as f64 - 2.0);
            let y0 = stream.next_unit() * (h as f64 - 2.0);
            boxes.push(
                BoxAnnotation::new(x0, y0, x0 + 1.5, y0 + 1.8, stream.next_index(k_a)).unwrap(),
            );
            total += 1;
        }
        annotated.push((g, t, boxes));
    }
    assert_eq!(total, 1000);

    let rel = stamp_relation_maps(&annotated, k_g, k_a, h, w, r).unwrap();

    // Independent per-cell brute force: count annotations whose rounded
    // transformed bottom-center is within Chebyshev distance r/2.
    let half = (r / 2) as i64;
    let mut oracle = vec![0u32; k_g * k_a * h * w];
    for (g, t, boxes) in &annotated {
        for b in boxes {
            let (x, y) = apply_affine(t, bottom_center(b));
            let u = (x + 0.5).floor() as i64;
            let v = (y + 0.5).floor() as i64;
            for i in 0..h as i64 {
                for j in 0..w as i64 {
                    if (i - v).abs() <= half && (j - u).abs() <= half {
                        oracle[((g * k_a + b.action_id) * h + i as usize) * w + j as usize] += 1;
                    }
                }
            }
        }
    }
    assert_eq!(rel.raw_counts(), &oracle[..], "integer counts must match exactly");
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 10);
    pass(&format!(
        "criterion 5: raw counts equal brute force on 1000 annotations (skipped: {}), {elapsed:.1?} < 10 s",
        rel.skipped_points()
    ));
}

// ---------------------------------------------------------------------------
// 6. End-to-end standard task
// ---------------------------------------------------------------------------

fn desk_train_config(synth: &SynthConfig, epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::desk(synth.k_g, synth.k_a, synth.h, synth.w, synth.c, synth.p);
    cfg.epochs = epochs;
    cfg.seed = synth.seed;
    cfg
}

#[test]
fn criterion_06_end_to_end_standard_task() {
    let t0 = Instant::now();
    let synth = SynthConfig::standard_task(0xE2E1);
    assert_eq!((synth.k_g, synth.k_a), (4, 3));
    assert_eq!((synth.h, synth.w, synth.c, synth.p), (24, 32, 4, 5));
    assert_eq!((synth.n_train, synth.n_test), (200, 100));
    let cfg = desk_train_config(&synth, 50);
    assert_eq!(cfg.r, 5);
    assert!(cfg.epochs <= 50);

    let ds = gen_dataset(&synth).unwrap();
    let knowledge = stage1_run(&ds.train_annotated, &cfg).unwrap().knowledge;
    let out = stage2_run(&ds.train_group_only(), &knowledge, &cfg, None).unwrap();
    assert!(
        out.metrics.mca_overall >= 0.95,
        "final-epoch train accuracy {} below 0.95",
        out.metrics.mca_overall
    );
    let metrics = evaluate(&ds.test, &knowledge, &out.params, &cfg).unwrap();
    assert!(
        metrics.mca_overall >= 0.90,
        "standard-task test MCA {} below 0.90",
        metrics.mca_overall
    );
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    pass(&format!(
        "criterion 6: standard task train MCA {:.3} >= 0.95, test MCA {:.3} >= 0.90 in {elapsed:.1?} < 5 min",
        out.metrics.mca_overall, metrics.mca_overall
    ));
}

// ---------------------------------------------------------------------------
// 7. Mechanism necessity on the hard variant
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_mechanism_necessity_hard_variant() {
    let t0 = Instant::now();
    let synth = SynthConfig::hard_task(0x4A8D);
    let ds = gen_dataset(&synth).unwrap();
    let cfg_full = desk_train_config(&synth, 50);
    let knowledge = stage1_run(&ds.train_annotated, &cfg_full).unwrap().knowledge;

    let full = {
        let out = stage2_run(&ds.train_group_only(), &knowledge, &cfg_full, None).unwrap();
        evaluate(&ds.test, &knowledge, &out.params, &cfg_full).unwrap()
    };
    let gs_only = {
        let mut cfg = cfg_full.clone();
        cfg.use_action_maps = false;
        let out = stage2_run(&ds.train_group_only(), &knowledge, &cfg, None).unwrap();
        evaluate(&ds.test, &knowledge, &out.params, &cfg).unwrap()
    };
    // Soft trend report for the remaining ablations; only the full vs
    // gs-only margin is asserted.
    let no_aug = {
        let mut cfg = cfg_full.clone();
        cfg.use_augmentation = false;
        let out = stage2_run(&ds.train_group_only(), &knowledge, &cfg, None).unwrap();
        evaluate(&ds.test, &knowledge, &out.params, &cfg).unwrap()
    };
    let no_sem = {
        let mut cfg = cfg_full.clone();
        cfg.use_semantics = false;
        let out = stage2_run(&ds.train_group_only(), &knowledge, &cfg, None).unwrap();
        evaluate(&ds.test, &knowledge, &out.params, &cfg).unwrap()
    };
    println!(
        "[REPORT] criterion 7 ablation MCAs: gs-only {:.3}, no-augmentation {:.3}, no-semantics {:.3}, full {:.3}",
        gs_only.mca_overall, no_aug.mca_overall, no_sem.mca_overall, full.mca_overall
    );

    let chance = 1.0 / synth.k_g as f64;
    assert!(
        gs_only.mca_overall <= chance + 0.10,
        "gs-only MCA {} above chance + 0.10",
        gs_only.mca_overall
    );
    assert!(
        full.mca_overall >= 0.85,
        "full model MCA {} below 0.85",
        full.mca_overall
    );
    assert!(
        full.mca_overall - gs_only.mca_overall >= 0.10,
        "margin {} below 0.10",
        full.mca_overall - gs_only.mca_overall
    );
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, budget 10 min");
    pass(&format!(
        "criterion 7: hard variant gs-only {:.3} <= {:.2}, full {:.3} >= 0.85, margin {:.3} >= 0.10, {elapsed:.1?} < 10 min",
        gs_only.mca_overall,
        chance + 0.10,
        full.mca_overall,
        full.mca_overall - gs_only.mca_overall
    ));
}

// ---------------------------------------------------------------------------
// 8. Loss arithmetic fixtures
// ---------------------------------------------------------------------------

fn two_class_logits_with_ce(target_ce: f64, label: usize) -> Vec<f64> {
    let a = -((target_ce.exp() - 1.0).ln());
    if label == 0 {
        vec![a, 0.0]
    } else {
        vec![0.0, a]
    }
}

#[test]
fn criterion_08_loss_arithmetic() {
    let defaults = TrainConfig::default();
    assert_eq!(defaults.lambda_pre, 1.0);
    assert_eq!(defaults.lambda_main, 3.0);

    let lg = two_class_logits_with_ce(0.5, 0);
    let ind = vec![
        two_class_logits_with_ce(0.2, 1),
        two_class_logits_with_ce(0.3, 0),
    ];
    let pre = loss_pre(&lg, 0, &ind, &[1, 0], defaults.lambda_pre).unwrap();
    assert!((pre - 1.0).abs() < 1e-12, "loss_pre {pre}");

    let gs = two_class_logits_with_ce(0.5, 0);
    let go = two_class_logits_with_ce(0.2, 0);
    let main = loss_main(&gs, &go, 0, defaults.lambda_main).unwrap();
    assert!((main - 1.1).abs() < 1e-12, "loss_main {main}");

    pass("criterion 8: loss_pre(0.5 + 1*(0.2+0.3)) = 1.0 and loss_main(0.5 + 3*0.2) = 1.1 exactly");
}

// ---------------------------------------------------------------------------
// 9. End-to-end determinism via the CLI
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vickam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for e in entries {
        if e.is_dir() {
            collect_files(&e, out);
        } else {
            out.push(e);
        }
    }
}

fn full_cli_run(root: &Path, synth_cfg: &Path, train_cfg: &Path) {
    let data = root.join("data");
    let knowledge = root.join("knowledge");
    let run = root.join("run");
    for (name, args) in [
        (
            "synth",
            vec![
                "synth",
                "--config",
                synth_cfg.to_str().unwrap(),
                "--out",
                data.to_str().unwrap(),
            ],
        ),
        (
            "stage1",
            vec![
                "stage1",
                "--data",
                data.to_str().unwrap(),
                "--config",
                train_cfg.to_str().unwrap(),
                "--out",
                knowledge.to_str().unwrap(),
            ],
        ),
        (
            "stage2",
            vec![
                "stage2",
                "--data",
                data.to_str().unwrap(),
                "--knowledge",
                knowledge.to_str().unwrap(),
                "--config",
                train_cfg.to_str().unwrap(),
                "--out",
                run.to_str().unwrap(),
            ],
        ),
        (
            "eval",
            vec![
                "eval",
                "--data",
                data.to_str().unwrap(),
                "--knowledge",
                knowledge.to_str().unwrap(),
                "--checkpoint",
                run.to_str().unwrap(),
            ],
        ),
    ] {
        let out = run_cli(&args);
        assert!(
            out.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn criterion_09_end_to_end_determinism() {
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let synth = SynthConfig {
        n_train: 40,
        n_test: 20,
        ..SynthConfig::standard_task(0xD37)
    };
    let mut train = TrainConfig::desk(synth.k_g, synth.k_a, synth.h, synth.w, synth.c, synth.p);
    train.epochs = 5;
    train.seed = 0xD37;
    let synth_cfg = tmp.path().join("synth.json");
    let train_cfg = tmp.path().join("train.json");
    std::fs::write(&synth_cfg, serde_json::to_string_pretty(&synth).unwrap()).unwrap();
    std::fs::write(&train_cfg, serde_json::to_string_pretty(&train).unwrap()).unwrap();

    let root_a = tmp.path().join("a");
    let root_b = tmp.path().join("b");
    full_cli_run(&root_a, &synth_cfg, &train_cfg);
    full_cli_run(&root_b, &synth_cfg, &train_cfg);

    // final_metrics.json bit-identical.
    let fm_a = std::fs::read(root_a.join("run/final_metrics.json")).unwrap();
    let fm_b = std::fs::read(root_b.join("run/final_metrics.json")).unwrap();
    assert_eq!(fm_a, fm_b, "final_metrics.json differs between runs");

    // Every checkpoint file bit-identical.
    let (mut files_a, mut files_b) = (Vec::new(), Vec::new());
    collect_files(&root_a.join("run/checkpoints"), &mut files_a);
    collect_files(&root_b.join("run/checkpoints"), &mut files_b);
    assert_eq!(files_a.len(), files_b.len());
    assert!(!files_a.is_empty());
    for (fa, fb) in files_a.iter().zip(&files_b) {
        assert_eq!(
            fa.strip_prefix(&root_a).unwrap(),
            fb.strip_prefix(&root_b).unwrap()
        );
        assert_eq!(
            std::fs::read(fa).unwrap(),
            std::fs::read(fb).unwrap(),
            "checkpoint file {fa:?} differs"
        );
    }
    let elapsed = t0.elapsed();
    pass(&format!(
        "criterion 9: two CLI runs bit-identical across {} checkpoint files and final_metrics.json, {elapsed:.1?}",
        files_a.len()
    ));
}

// ---------------------------------------------------------------------------
// 10. Data-ratio knob
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_data_ratio_monotonicity() {
    let t0 = Instant::now();
    let fractions = [0.1, 0.25, 0.5, 1.0];
    let seeds = [11u64, 22, 33];
    let mut mean_mca = vec![0.0f64; fractions.len()];
    for &seed in &seeds {
        let synth = SynthConfig::standard_task(seed);
        let ds = gen_dataset(&synth).unwrap();
        let base_cfg = desk_train_config(&synth, 50);
        let knowledge = stage1_run(&ds.train_annotated, &base_cfg).unwrap().knowledge;
        for (fi, &fraction) in fractions.iter().enumerate() {
            let mut cfg = base_cfg.clone();
            cfg.train_fraction = fraction;
            let out = stage2_run(&ds.train_group_only(), &knowledge, &cfg, None).unwrap();
            let metrics = evaluate(&ds.test, &knowledge, &out.params, &cfg).unwrap();
            mean_mca[fi] += metrics.mca_overall / seeds.len() as f64;
        }
    }
    for i in 1..fractions.len() {
        assert!(
            mean_mca[i] >= mean_mca[i - 1] - 0.02,
            "mean MCA dropped beyond tolerance: {:?} at fractions {:?}",
            mean_mca,
            fractions
        );
    }
    let elapsed = t0.elapsed();
    pass(&format!(
        "criterion 10: mean test MCA over 3 seeds {:?} non-decreasing (0.02 band) across fractions {:?}, {elapsed:.1?}",
        mean_mca
            .iter()
            .map(|v| (v * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        fractions
    ));
}
