//! Command-line workflow: dataset generation, the two training stages,
//! evaluation, the correlation benchmark, and heatmap export.
//!
//! Every command is deterministic given `--seed` (fallback order: flag,
//! config file, `VICKAM_SEED`, then 0) and echoes its resolved
//! configuration into the output directory. Failures print one
//! machine-readable JSON object to stderr; exit codes are 0 ok, 2 usage,
//! 3 format, 4 shape, 5 numeric.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fftcorr::{bench_corr, gen_action_maps, zscore_maps, BenchConfig, FeatureMap};
use crate::head::{augment, HeadParams};
use crate::heatmap::write_pgm;
use crate::pipeline::{
    echo_config, evaluate, last_checkpoint, read_train_config, stage1_run, stage2_run, Knowledge,
    TrainConfig,
};
use crate::synth::{gen_dataset, load_dataset_meta, load_group_split, load_stage1_split,
    save_dataset, SynthConfig};
use crate::tensor::read_tensor;

#[derive(Parser, Debug)]
#[command(name = "vickam", version, about = "Prototype-guided action maps for group activity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset directory from a JSON config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stage 1: train annotated classifiers, extract prototypes and
    /// relation maps into a knowledge directory.
    Stage1 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stage 2: train the main head on group labels only.
    Stage2 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        knowledge: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Ablation: broadcast action maps without relation-map products.
        #[arg(long)]
        no_augmentation: bool,
        /// Ablation: zero the semantic rows fed to the integrator.
        #[arg(long)]
        no_semantics: bool,
        /// Ablation: disable the go path entirely (global classifier only).
        #[arg(long)]
        gs_only: bool,
        /// Train on this fraction of the training split.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on the test split; prints final_metrics.json.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        knowledge: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Where to write final_metrics.json (default: the run directory
        /// owning the checkpoint, else the checkpoint directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation backend benchmark; one JSON line per backend and size.
    Bench {
        /// Comma-separated sizes, each HxWxCxP or HxWxCxPxK.
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export a sample's action maps and augmented sub-maps as PGM files.
    ExportMaps {
        /// Path to a sample grid TensorFile (h x w x C).
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        knowledge: PathBuf,
        /// Optional checkpoint; adds predictions.json to the output.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            emit_error_json(&Error::Usage(e.to_string()));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            emit_error_json(&e);
            e.exit_code()
        }
    }
}

fn emit_error_json(e: &Error) {
    let mut obj = serde_json::json!({
        "code": e.exit_code(),
        "message": e.to_string(),
    });
    if let Some(path) = e.path() {
        obj["path"] = serde_json::json!(path.display().to_string());
    }
    eprintln!("{obj}");
}


/// Best-effort stdout line; results are already on disk when this runs,
/// so a closed pipe (e.g. piping into `head`) must not panic.
fn print_line(line: &str) {
    use std::io::Write as _;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn env_seed() -> Option<u64> {
    std::env::var("VICKAM_SEED").ok()?.parse().ok()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out, seed } => cmd_synth(&config, &out, seed),
        Command::Stage1 {
            data,
            config,
            out,
            seed,
        } => cmd_stage1(&data, config.as_deref(), &out, seed),
        Command::Stage2 {
            data,
            knowledge,
            config,
            out,
            no_augmentation,
            no_semantics,
            gs_only,
            train_fraction,
            seed,
        } => cmd_stage2(
            &data,
            &knowledge,
            config.as_deref(),
            &out,
            StageTwoFlags {
                no_augmentation,
                no_semantics,
                gs_only,
                train_fraction,
                seed,
            },
        ),
        Command::Eval {
            data,
            knowledge,
            checkpoint,
            out,
        } => cmd_eval(&data, &knowledge, &checkpoint, out.as_deref()),
        Command::Bench {
            sizes,
            repeats,
            seed,
        } => cmd_bench(&sizes, repeats, seed),
        Command::ExportMaps {
            sample,
            knowledge,
            checkpoint,
            out,
        } => cmd_export_maps(&sample, &knowledge, checkpoint.as_deref(), &out),
    }
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&body).map_err(|e| Error::Format {
        path: path.into(),
        detail: format!("bad JSON: {e}"),
    })?;
    // Echoed run configs wrap the payload as {"version", "config", ...};
    // accept them directly so a run can be reproduced from its echo.
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Error::Format {
        path: path.into(),
        detail: format!("bad JSON: {e}"),
    })
}

fn cmd_synth(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg: SynthConfig = read_json_file(config)?;
    if let Some(s) = seed.or_else(env_seed) {
        cfg.seed = s;
    }
    let ds = gen_dataset(&cfg)?;
    save_dataset(&ds, out)?;
    echo_config(out, &cfg)?;
    print_line(&serde_json::json!({
        "dataset": out.display().to_string(),
        "n_train": ds.train_annotated.len(),
        "n_test": ds.test.len(),
        "seed": cfg.seed,
    })
    .to_string());
    Ok(())
}

/// Resolved training config: JSON file when given, otherwise a desk
/// config derived from the dataset manifest; flags override both.
fn resolve_train_config(
    data: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(path) => read_json_file::<TrainConfig>(path)?,
        None => {
            let (synth, _, _) = load_dataset_meta(data)?;
            let mut c = TrainConfig::desk(synth.k_g, synth.k_a, synth.h, synth.w, synth.c, synth.p);
            c.seed = synth.seed;
            c
        }
    };
    if let Some(s) = seed.or_else(env_seed) {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_stage1(data: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = resolve_train_config(data, config, seed)?;
    let train = load_stage1_split(data)?;
    let result = stage1_run(&train, &cfg)?;
    result.knowledge.save(out)?;
    echo_config(out, &cfg)?;
    let metrics_path = out.join("metrics.json");
    let body = serde_json::to_string_pretty(&result.metrics)
        .map_err(|e| Error::Other(format!("serialize metrics: {e}")))?;
    std::fs::write(&metrics_path, &body).map_err(|e| Error::io(&metrics_path, e))?;
    print_line(&body);
    Ok(())
}

struct StageTwoFlags {
    no_augmentation: bool,
    no_semantics: bool,
    gs_only: bool,
    train_fraction: Option<f64>,
    seed: Option<u64>,
}

fn cmd_stage2(
    data: &Path,
    knowledge_dir: &Path,
    config: Option<&Path>,
    out: &Path,
    flags: StageTwoFlags,
) -> Result<()> {
    let mut cfg = resolve_train_config(data, config, flags.seed)?;
    if flags.no_augmentation {
        cfg.use_augmentation = false;
    }
    if flags.no_semantics {
        cfg.use_semantics = false;
    }
    if flags.gs_only {
        cfg.use_action_maps = false;
    }
    if let Some(f) = flags.train_fraction {
        cfg.train_fraction = f;
    }
    cfg.validate()?;

    let knowledge = Knowledge::load(knowledge_dir)?;
    let train = load_group_split(data, "train")?;
    echo_config(out, &cfg)?;
    let result = stage2_run(&train, &knowledge, &cfg, Some(out))?;
    let metrics_path = out.join("final_train_metrics.json");
    let body = serde_json::to_string_pretty(&result.metrics)
        .map_err(|e| Error::Other(format!("serialize metrics: {e}")))?;
    std::fs::write(&metrics_path, &body).map_err(|e| Error::io(&metrics_path, e))?;
    print_line(&body);
    Ok(())
}

fn cmd_eval(data: &Path, knowledge_dir: &Path, checkpoint: &Path, out: Option<&Path>) -> Result<()> {
    let checkpoint = if checkpoint.join("manifest.json").exists() {
        checkpoint.to_path_buf()
    } else {
        // Accept a run directory and pick its last checkpoint.
        last_checkpoint(checkpoint)?
    };
    let cfg = read_train_config(&checkpoint)?;
    let (params, _) = HeadParams::load(&checkpoint)?;
    if params.dims != cfg.head_dims() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint dims {:?} do not match its config {:?}",
            params.dims,
            cfg.head_dims()
        )));
    }
    let knowledge = Knowledge::load(knowledge_dir)?;
    let test = load_group_split(data, "test")?;
    let metrics = evaluate(&test, &knowledge, &params, &cfg)?;

    let body = serde_json::to_string_pretty(&metrics)
        .map_err(|e| Error::Other(format!("serialize metrics: {e}")))?;
    let dest = match out {
        Some(p) => p.to_path_buf(),
        None => {
            // checkpoints/epoch_NNN -> run root when the layout matches.
            let run_root = checkpoint
                .parent()
                .filter(|p| p.file_name().is_some_and(|n| n == "checkpoints"))
                .and_then(|p| p.parent());
            run_root.unwrap_or(&checkpoint).join("final_metrics.json")
        }
    };
    if let Some(parent) = dest.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&dest, &body).map_err(|e| Error::io(&dest, e))?;
    print_line(&body);
    Ok(())
}

/// (h, w, C, p, K_a) tuple parsed from one `--sizes` entry.
type SizeSpec = (usize, usize, usize, usize, usize);

fn parse_sizes(spec: &str) -> Result<Vec<SizeSpec>> {
    let mut out = Vec::new();
    for entry in spec.split(',').filter(|s| !s.is_empty()) {
        let parts: Vec<usize> = entry
            .split('x')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("bad size entry {entry:?}")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [h, w, c, p] => out.push((h, w, c, p, 1)),
            [h, w, c, p, k] => out.push((h, w, c, p, k)),
            _ => {
                return Err(Error::Usage(format!(
                    "size entry {entry:?} must be HxWxCxP or HxWxCxPxK"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("no sizes given".into()));
    }
    Ok(out)
}

fn cmd_bench(sizes: &str, repeats: usize, seed: Option<u64>) -> Result<()> {
    let seed = seed.or_else(env_seed).unwrap_or(0xBEC8);
    for (h, w, c, p, k_a) in parse_sizes(sizes)? {
        let cfg = BenchConfig {
            h,
            w,
            c,
            p,
            k_a,
            repeats,
            seed,
        };
        for report in bench_corr(&cfg)? {
            print_line(
                &serde_json::to_string(&report)
                    .map_err(|e| Error::Other(format!("serialize report: {e}")))?,
            );
        }
    }
    Ok(())
}

fn cmd_export_maps(
    sample: &Path,
    knowledge_dir: &Path,
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let grid = read_tensor(sample)?;
    let x = FeatureMap::new(grid)?;
    let knowledge = Knowledge::load(knowledge_dir)?;
    let cfg = match checkpoint {
        Some(ckpt) => read_train_config(ckpt)?,
        None => {
            let mut c = TrainConfig::desk(
                knowledge.relmaps.k_g(),
                knowledge.bank.num_actions(),
                x.h(),
                x.w(),
                x.channels(),
                knowledge.bank.side(),
            );
            c.r = knowledge.relmaps.marked_region();
            c
        }
    };

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    echo_config(out, &cfg)?;
    let maps = gen_action_maps(&x, &knowledge.bank)?;
    let maps = if cfg.zscore_maps { zscore_maps(&maps) } else { maps };
    let (h, w) = (maps.h(), maps.w());
    for k in 0..maps.num_actions() {
        let path = out.join(format!("action_{k}.pgm"));
        write_pgm(&path, h, w, maps.map(k))?;
    }
    let aug = augment(&maps, &knowledge.relmaps, true)?;
    let hw = h * w;
    for g in 0..aug.k_g() {
        for k in 0..aug.k_a() {
            let base = (g * aug.k_a() + k) * hw;
            let slice = &aug.maps().data()[base..base + hw];
            let path = out.join(format!("augmented_g{g}_a{k}.pgm"));
            write_pgm(&path, h, w, slice)?;
        }
    }
    if let Some(ckpt) = checkpoint {
        let (params, _) = HeadParams::load(ckpt)?;
        let (probs, label) = crate::pipeline::predict(&x, &knowledge, &params, &cfg)?;
        let path = out.join("predictions.json");
        let body = serde_json::to_string_pretty(&serde_json::json!({
            "probs": probs,
            "label": label,
        }))
        .map_err(|e| Error::Other(format!("serialize predictions: {e}")))?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    print_line(&serde_json::json!({
        "out": out.display().to_string(),
        "action_maps": maps.num_actions(),
        "augmented_maps": aug.k_g() * aug.k_a(),
    })
    .to_string());
    Ok(())
}
