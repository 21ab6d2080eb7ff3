//! Two-stage training, evaluation, and ablation orchestration.
//!
//! Stage 1 consumes fully annotated samples: it trains the global
//! activity classifier and the individual action classifier jointly,
//! then freezes the class-mean prototype bank and the relation maps
//! built from the same annotations. Stage 2 sees group labels only; per
//! sample it generates action maps, augments them with the relation
//! maps, runs the integration head, and trains under the weighted
//! two-classifier loss. Test-time prediction averages the softmax
//! probabilities of both heads.
//!
//! Everything is deterministic given (config, seed, data): batch orders
//! come from the counter-based generator, per-sample work is cached as
//! pure function results, and gradient accumulation order is fixed.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fftcorr::{gen_action_maps, zscore_maps};
use crate::head::{
    adam_step, backward_act, backward_go, backward_gs, forward_act, forward_go, forward_gs,
    global_pool, softmax, softmax_ce, AdamState, HeadDims, HeadParams, SemanticTable,
};
use crate::prototypes::{build_prototypes, roi_pool, PrototypeBank};
use crate::relmaps::{stamp_relation_maps, RelationMaps};
use crate::rng::{derive_seed, fnv1a, Stream};
use crate::synth::{GroupOnlySample, Stage1Sample};

/// Learning-rate schedule, per stage.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant {
        lr: f64,
    },
    /// Linear warm-up from `init_lr` to `peak_lr` over `warmup_epochs`,
    /// then linear decay to `final_lr` by the last epoch.
    WarmupDecay {
        init_lr: f64,
        peak_lr: f64,
        warmup_epochs: usize,
        final_lr: f64,
    },
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize, total_epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::WarmupDecay {
                init_lr,
                peak_lr,
                warmup_epochs,
                final_lr,
            } => {
                if epoch < warmup_epochs {
                    let t = (epoch as f64 + 1.0) / warmup_epochs as f64;
                    init_lr + (peak_lr - init_lr) * t
                } else {
                    let span = total_epochs.saturating_sub(warmup_epochs).max(1);
                    let t = (epoch - warmup_epochs) as f64 / span as f64;
                    peak_lr + (final_lr - peak_lr) * t
                }
            }
        }
    }
}

/// Resolved training configuration. Paper-scale defaults; the bundled
/// desk configs override the sizes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(rename = "K_g")]
    pub k_g: usize,
    #[serde(rename = "K_a")]
    pub k_a: usize,
    pub h: usize,
    pub w: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub p: usize,
    /// Semantic embedding width d.
    pub d: usize,
    /// Encoder width D.
    #[serde(rename = "D")]
    pub d_feat: usize,
    /// Marked-region side for relation maps.
    pub r: usize,
    pub lambda_pre: f64,
    pub lambda_main: f64,
    pub lr_stage1: LrSchedule,
    pub lr_stage2: LrSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub use_action_maps: bool,
    pub use_augmentation: bool,
    pub use_semantics: bool,
    /// Let gradient flow into the semantic table.
    pub train_semantics: bool,
    /// Optional per-map standardization before augmentation.
    pub zscore_maps: bool,
    /// Stage-2 training-set fraction (nested prefixes of one seeded shuffle).
    pub train_fraction: f64,
    /// Tolerate action classes with no stage-1 samples.
    pub zero_fill: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_g: 8,
            k_a: 9,
            h: 90,
            w: 160,
            c: 8,
            p: 7,
            d: 128,
            d_feat: 256,
            r: 19,
            lambda_pre: 1.0,
            lambda_main: 3.0,
            lr_stage1: LrSchedule::Constant { lr: 5e-4 },
            lr_stage2: LrSchedule::Constant { lr: 5e-4 },
            epochs: 50,
            batch_size: 4,
            seed: 0,
            use_action_maps: true,
            use_augmentation: true,
            use_semantics: true,
            train_semantics: false,
            zscore_maps: false,
            train_fraction: 1.0,
            zero_fill: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.k_g, self.k_a, self.h, self.w, self.c, self.p, self.d, self.d_feat, self.r,
        ];
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("all sizes must be >= 1".into()));
        }
        if self.p > self.h.min(self.w) {
            return Err(Error::InvalidConfig(format!(
                "p={} exceeds min(h, w)={}",
                self.p,
                self.h.min(self.w)
            )));
        }
        if self.r.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("r={} must be odd", self.r)));
        }
        if self.lambda_pre < 0.0 || self.lambda_main < 0.0 {
            return Err(Error::InvalidConfig("lambdas must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction {} outside (0, 1]",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Desk-scale config matching a dataset's sizes; small head widths.
    pub fn desk(k_g: usize, k_a: usize, h: usize, w: usize, c: usize, p: usize) -> Self {
        TrainConfig {
            k_g,
            k_a,
            h,
            w,
            c,
            p,
            d: 16,
            d_feat: 32,
            r: 5,
            ..TrainConfig::default()
        }
    }

    pub fn head_dims(&self) -> HeadDims {
        HeadDims {
            k_g: self.k_g,
            k_a: self.k_a,
            h: self.h,
            w: self.w,
            c: self.c,
            d_feat: self.d_feat,
            d_sem: self.d,
            p: self.p,
        }
    }

    /// Stable hash of the resolved config (used in checkpoint manifests).
    pub fn config_hash(&self) -> u64 {
        fnv1a(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

/// Classification metrics plus training curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub mca_overall: f64,
    pub mca_per_class_mean: f64,
    pub confusion: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub loss_curve: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action_accuracy: Option<f64>,
}

impl Metrics {
    fn from_confusion(confusion: Vec<Vec<u64>>) -> Metrics {
        let total: u64 = confusion.iter().map(|r| r.iter().sum::<u64>()).sum();
        let correct: u64 = confusion.iter().enumerate().map(|(i, r)| r[i]).sum();
        let mut per_class = Vec::new();
        for (i, row) in confusion.iter().enumerate() {
            let n: u64 = row.iter().sum();
            if n > 0 {
                per_class.push(row[i] as f64 / n as f64);
            }
        }
        let mca_per_class_mean = if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().sum::<f64>() / per_class.len() as f64
        };
        Metrics {
            mca_overall: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
            mca_per_class_mean,
            confusion,
            loss_curve: Vec::new(),
            action_accuracy: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Stage-1 loss: group cross-entropy plus `lambda_pre` times the summed
/// per-individual action cross-entropies.
pub fn loss_pre(
    logits_g: &[f64],
    g: usize,
    per_individual_logits: &[Vec<f64>],
    actions: &[usize],
    lambda_pre: f64,
) -> Result<f64> {
    if per_individual_logits.len() != actions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} individual logit rows for {} action labels",
            per_individual_logits.len(),
            actions.len()
        )));
    }
    let mut loss = softmax_ce(logits_g, g)?.0;
    for (logits, &a) in per_individual_logits.iter().zip(actions) {
        loss += lambda_pre * softmax_ce(logits, a)?.0;
    }
    Ok(loss)
}

/// Stage-2 loss: `CE(gs) + lambda_main * CE(go)`.
pub fn loss_main(logits_gs: &[f64], logits_go: &[f64], g: usize, lambda_main: f64) -> Result<f64> {
    Ok(softmax_ce(logits_gs, g)?.0 + lambda_main * softmax_ce(logits_go, g)?.0)
}

// ---------------------------------------------------------------------------
// Knowledge bundle
// ---------------------------------------------------------------------------

/// Everything stage 1 transfers to stage 2 and testing: the prototype
/// bank, the relation maps, and the stage-1 classifier weights.
#[derive(Debug, Clone)]
pub struct Knowledge {
    pub bank: PrototypeBank,
    pub relmaps: RelationMaps,
    pub stage1_params: HeadParams,
}

impl Knowledge {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.bank.save(&dir.join("prototypes"))?;
        self.relmaps.save(&dir.join("relmaps"))?;
        self.stage1_params.save(&dir.join("stage1_params"), 0, 0)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let bank = PrototypeBank::load(&dir.join("prototypes"))?;
        let relmaps = RelationMaps::load(&dir.join("relmaps"))?;
        let (stage1_params, _) = HeadParams::load(&dir.join("stage1_params"))?;
        Ok(Knowledge {
            bank,
            relmaps,
            stage1_params,
        })
    }

    fn check_against(&self, cfg: &TrainConfig) -> Result<()> {
        if self.bank.num_actions() != cfg.k_a
            || self.bank.side() != cfg.p
            || self.bank.channels() != cfg.c
        {
            return Err(Error::ShapeMismatch(format!(
                "prototype bank {:?} does not match config (K_a={}, p={}, C={})",
                self.bank.tensor().dims(),
                cfg.k_a,
                cfg.p,
                cfg.c
            )));
        }
        if self.relmaps.k_g() != cfg.k_g
            || self.relmaps.k_a() != cfg.k_a
            || self.relmaps.h() != cfg.h
            || self.relmaps.w() != cfg.w
        {
            return Err(Error::ShapeMismatch(format!(
                "relation maps {:?} do not match config (K_g={}, K_a={}, h={}, w={})",
                self.relmaps.maps().dims(),
                cfg.k_g,
                cfg.k_a,
                cfg.h,
                cfg.w
            )));
        }
        Ok(())
    }
}

fn semantic_table(cfg: &TrainConfig, names: &[String]) -> Result<SemanticTable> {
    let mut table = crate::head::embed_labels(names, cfg.d, derive_seed(cfg.seed, 0x5E11))?;
    table.set_trainable(cfg.train_semantics && cfg.use_semantics);
    Ok(table)
}

fn check_samples_shape(h: usize, w: usize, c: usize, cfg: &TrainConfig) -> Result<()> {
    if h != cfg.h || w != cfg.w || c != cfg.c {
        return Err(Error::ShapeMismatch(format!(
            "sample grid {h} x {w} x {c} does not match config {} x {} x {}",
            cfg.h, cfg.w, cfg.c
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct Stage1Output {
    pub knowledge: Knowledge,
    pub metrics: Metrics,
}

/// Trains the stage-1 classifiers under the pre-training loss, then
/// builds the prototype bank and relation maps from the same
/// annotations. With zero epochs the classifiers stay at initialization
/// but knowledge is still produced.
pub fn stage1_run(train: &[Stage1Sample], cfg: &TrainConfig) -> Result<Stage1Output> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("stage 1 requires training samples".into()));
    }
    for s in train {
        check_samples_shape(s.features.h(), s.features.w(), s.features.channels(), cfg)?;
        if s.group_label >= cfg.k_g {
            return Err(Error::LabelOutOfRange {
                index: s.group_label,
                bound: cfg.k_g,
            });
        }
        if s.annotations.is_empty() {
            return Err(Error::InvalidConfig(
                "stage 1 sample without annotations".into(),
            ));
        }
    }

    let action_names: Vec<String> = (0..cfg.k_a).map(|k| format!("action_{k}")).collect();
    let table = semantic_table(cfg, &action_names)?;
    let mut params = HeadParams::init(cfg.head_dims(), derive_seed(cfg.seed, 0x51A6E1), &table)?;

    // Per-sample precomputation: pooled global features and flattened ROI
    // features (pure functions of frozen inputs).
    let mut pooled = Vec::with_capacity(train.len());
    let mut rois: Vec<Vec<(Vec<f64>, usize)>> = Vec::with_capacity(train.len());
    for s in train {
        pooled.push(global_pool(
            s.features.grid().data(),
            s.features.h(),
            s.features.w(),
            s.features.channels(),
        ));
        let mut per_sample = Vec::with_capacity(s.annotations.len());
        for b in &s.annotations {
            if b.action_id >= cfg.k_a {
                return Err(Error::LabelOutOfRange {
                    index: b.action_id,
                    bound: cfg.k_a,
                });
            }
            let feat = roi_pool(&s.features, b, cfg.p)?;
            per_sample.push((
                feat.data().iter().map(|&v| v as f64).collect::<Vec<f64>>(),
                b.action_id,
            ));
        }
        rois.push(per_sample);
    }

    let mut adam = AdamState::new(&params, cfg.lr_stage1.lr_at(0, cfg.epochs.max(1)));
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        adam.lr = cfg.lr_stage1.lr_at(epoch, cfg.epochs);
        Stream::new(derive_seed(cfg.seed, 0x0E90C0 + epoch as u64)).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = params.zero_grads();
            for &i in batch {
                let logits_g = forward_gs(&params, &pooled[i]);
                let (lg, dg) = softmax_ce(&logits_g, train[i].group_label)?;
                backward_gs(&params, &pooled[i], &dg, scale, &mut grads);
                let mut sample_loss = lg;
                for (feat, action) in &rois[i] {
                    let logits_a = forward_act(&params, feat);
                    let (la, da) = softmax_ce(&logits_a, *action)?;
                    backward_act(&params, feat, &da, cfg.lambda_pre * scale, &mut grads);
                    sample_loss += cfg.lambda_pre * la;
                }
                epoch_loss += sample_loss;
            }
            adam_step(&mut adam, &mut params, &grads)?;
        }
        loss_curve.push(epoch_loss / train.len() as f64);
    }

    // Knowledge extraction from the same annotations.
    let roi_samples: Vec<_> = train
        .iter()
        .map(|s| (s.features.clone(), s.annotations.clone()))
        .collect();
    let bank = build_prototypes(&roi_samples, cfg.p, cfg.k_a, cfg.zero_fill)?;
    let annotated: Vec<_> = train
        .iter()
        .map(|s| (s.group_label, s.affine, s.annotations.clone()))
        .collect();
    let relmaps = stamp_relation_maps(&annotated, cfg.k_g, cfg.k_a, cfg.h, cfg.w, cfg.r)?;

    // Training-set metrics for both stage-1 classifiers.
    let mut confusion = vec![vec![0u64; cfg.k_g]; cfg.k_g];
    let (mut act_correct, mut act_total) = (0u64, 0u64);
    for (i, s) in train.iter().enumerate() {
        let logits_g = forward_gs(&params, &pooled[i]);
        confusion[s.group_label][argmax(&logits_g)] += 1;
        for (feat, action) in &rois[i] {
            let logits_a = forward_act(&params, feat);
            if argmax(&logits_a) == *action {
                act_correct += 1;
            }
            act_total += 1;
        }
    }
    let mut metrics = Metrics::from_confusion(confusion);
    metrics.loss_curve = loss_curve;
    metrics.action_accuracy = Some(if act_total == 0 {
        0.0
    } else {
        act_correct as f64 / act_total as f64
    });

    Ok(Stage1Output {
        knowledge: Knowledge {
            bank,
            relmaps,
            stage1_params: params,
        },
        metrics,
    })
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-sample cached inputs for stage-2 steps (pure function of frozen
/// knowledge and the sample grid).
struct SampleCache {
    pooled: Vec<f64>,
    /// K_g * K_a * h * w, present when the go path is enabled.
    mhat: Option<Vec<f64>>,
}

fn build_cache(
    sample: &GroupOnlySample,
    knowledge: &Knowledge,
    cfg: &TrainConfig,
) -> Result<SampleCache> {
    check_samples_shape(
        sample.features.h(),
        sample.features.w(),
        sample.features.channels(),
        cfg,
    )?;
    let pooled = global_pool(
        sample.features.grid().data(),
        sample.features.h(),
        sample.features.w(),
        sample.features.channels(),
    );
    let mhat = if cfg.use_action_maps {
        let maps = gen_action_maps(&sample.features, &knowledge.bank)?;
        let maps = if cfg.zscore_maps { zscore_maps(&maps) } else { maps };
        let aug = crate::head::augment(&maps, &knowledge.relmaps, cfg.use_augmentation)?;
        Some(aug.to_f64())
    } else {
        None
    };
    Ok(SampleCache { pooled, mhat })
}

fn fused_probs(params: &HeadParams, cache: &SampleCache, y: &[f64]) -> Vec<f64> {
    let logits_gs = forward_gs(params, &cache.pooled);
    match &cache.mhat {
        Some(mhat) => {
            let trace = forward_go(params, mhat, y);
            let ps = softmax(&logits_gs);
            let po = softmax(&trace.logits);
            ps.iter().zip(&po).map(|(a, b)| (a + b) / 2.0).collect()
        }
        None => softmax(&logits_gs),
    }
}

#[derive(Debug)]
pub struct Stage2Output {
    pub params: HeadParams,
    pub metrics: Metrics,
}

/// Trains the main head on group labels only. When `run_dir` is given,
/// writes checkpoints/epoch_NNN/ and metrics.jsonl as it goes.
pub fn stage2_run(
    train: &[GroupOnlySample],
    knowledge: &Knowledge,
    cfg: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<Stage2Output> {
    cfg.validate()?;
    knowledge.check_against(cfg)?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("stage 2 requires training samples".into()));
    }
    for s in train {
        if s.group_label >= cfg.k_g {
            return Err(Error::LabelOutOfRange {
                index: s.group_label,
                bound: cfg.k_g,
            });
        }
    }

    let table = semantic_table(cfg, knowledge.bank.action_names())?;
    let mut params = HeadParams::init(cfg.head_dims(), derive_seed(cfg.seed, 0x57A6E2), &table)?;
    // Transfer the stage-1 global classifier as pre-trained weights.
    for name in ["w_gs", "b_gs"] {
        let src = knowledge.stage1_params.block(name).data.clone();
        let idx = params.block_index(name);
        if src.len() == params.blocks()[idx].data.len() {
            params.blocks_mut()[idx].data = src;
        }
    }

    // Deterministic nested subsample for the data-ratio knob.
    let mut order: Vec<usize> = (0..train.len()).collect();
    Stream::new(derive_seed(cfg.seed, 0xF8AC)).shuffle(&mut order);
    let n_used = ((cfg.train_fraction * train.len() as f64).round() as usize)
        .clamp(1, train.len());
    let used: Vec<usize> = order[..n_used].to_vec();

    let mut caches: Vec<Option<SampleCache>> = (0..train.len()).map(|_| None).collect();
    for &i in &used {
        caches[i] = Some(build_cache(&train[i], knowledge, cfg)?);
    }

    let config_hash = cfg.config_hash();
    let mut metrics_log: Option<std::fs::File> = match run_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            // The run directory is self-contained: it carries the frozen
            // knowledge it was trained against.
            knowledge.bank.save(&dir.join("prototypes"))?;
            knowledge.relmaps.save(&dir.join("relmaps"))?;
            let path = dir.join("metrics.jsonl");
            Some(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?)
        }
        None => None,
    };

    let zero_y = vec![0.0f64; cfg.k_a * cfg.d];
    let resolve_y = |params: &HeadParams| -> Vec<f64> {
        if !cfg.use_semantics {
            zero_y.clone()
        } else {
            crate::head::resolve_semantics(params, &table)
        }
    };

    let mut adam = AdamState::new(&params, cfg.lr_stage2.lr_at(0, cfg.epochs.max(1)));
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut batch_order = used.clone();
    for epoch in 0..cfg.epochs {
        adam.lr = cfg.lr_stage2.lr_at(epoch, cfg.epochs);
        Stream::new(derive_seed(cfg.seed, 0x0E90C1 + epoch as u64)).shuffle(&mut batch_order);
        let mut epoch_loss = 0.0;
        for batch in batch_order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = params.zero_grads();
            let y = resolve_y(&params);
            for &i in batch {
                let cache = caches[i].as_ref().expect("cache built for used sample");
                let g = train[i].group_label;
                let logits_gs = forward_gs(&params, &cache.pooled);
                let (loss_s, dgs) = softmax_ce(&logits_gs, g)?;
                backward_gs(&params, &cache.pooled, &dgs, scale, &mut grads);
                let mut sample_loss = loss_s;
                if let Some(mhat) = &cache.mhat {
                    let trace = forward_go(&params, mhat, &y);
                    let (loss_o, dgo) = softmax_ce(&trace.logits, g)?;
                    if cfg.lambda_main > 0.0 {
                        backward_go(&params, &trace, &dgo, cfg.lambda_main * scale, &mut grads);
                    }
                    sample_loss += cfg.lambda_main * loss_o;
                }
                epoch_loss += sample_loss;
            }
            adam_step(&mut adam, &mut params, &grads)?;
        }
        let mean_loss = epoch_loss / used.len() as f64;
        loss_curve.push(mean_loss);

        // Per-epoch train accuracy over the used subset.
        let y = resolve_y(&params);
        let mut correct = 0usize;
        for &i in &used {
            let cache = caches[i].as_ref().unwrap();
            let probs = fused_probs(&params, cache, &y);
            if argmax(&probs) == train[i].group_label {
                correct += 1;
            }
        }
        let train_mca = correct as f64 / used.len() as f64;

        if let Some(dir) = run_dir {
            let ckpt = dir.join(format!("checkpoints/epoch_{epoch:03}"));
            params.save(&ckpt, adam.step(), config_hash)?;
            write_train_config(&ckpt, cfg)?;
            if let Some(log) = metrics_log.as_mut() {
                let line = serde_json::json!({
                    "epoch": epoch,
                    "mean_loss": mean_loss,
                    "lr": adam.lr,
                    "train_mca": train_mca,
                    "n_train_used": used.len(),
                });
                writeln!(log, "{line}")
                    .map_err(|e| Error::io(dir.join("metrics.jsonl"), e))?;
            }
        }
    }

    // Final training metrics.
    let y = resolve_y(&params);
    let mut confusion = vec![vec![0u64; cfg.k_g]; cfg.k_g];
    for &i in &used {
        let cache = caches[i].as_ref().unwrap();
        let probs = fused_probs(&params, cache, &y);
        confusion[train[i].group_label][argmax(&probs)] += 1;
    }
    let mut metrics = Metrics::from_confusion(confusion);
    metrics.loss_curve = loss_curve;

    Ok(Stage2Output { params, metrics })
}

/// Writes the resolved config next to a checkpoint so evaluation can
/// reconstruct ablation flags without the run directory.
pub fn write_train_config(dir: &Path, cfg: &TrainConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("train_config.json");
    let body = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Other(format!("serialize config: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

pub fn read_train_config(dir: &Path) -> Result<TrainConfig> {
    let path = dir.join("train_config.json");
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let cfg: TrainConfig = serde_json::from_str(&body).map_err(|e| Error::Format {
        path,
        detail: format!("bad train config: {e}"),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Prediction and evaluation
// ---------------------------------------------------------------------------

/// Fused prediction for one sample: the average of the two heads'
/// softmax distributions (gs only when the go path is disabled). Argmax
/// ties break toward the lowest index.
pub fn predict(
    x: &crate::fftcorr::FeatureMap,
    knowledge: &Knowledge,
    params: &HeadParams,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, usize)> {
    let sample = GroupOnlySample {
        features: x.clone(),
        group_label: 0,
    };
    let cache = build_cache(&sample, knowledge, cfg)?;
    let table = semantic_table(cfg, knowledge.bank.action_names())?;
    let y = if !cfg.use_semantics {
        vec![0.0f64; cfg.k_a * cfg.d]
    } else if params.train_y {
        params.block("y").data.clone()
    } else {
        table.table().data().iter().map(|&v| v as f64).collect()
    };
    let probs = fused_probs(params, &cache, &y);
    let label = argmax(&probs);
    Ok((probs, label))
}

/// Evaluates on a labeled group-only split.
pub fn evaluate(
    test: &[GroupOnlySample],
    knowledge: &Knowledge,
    params: &HeadParams,
    cfg: &TrainConfig,
) -> Result<Metrics> {
    cfg.validate()?;
    knowledge.check_against(cfg)?;
    if test.is_empty() {
        return Err(Error::InvalidConfig("empty test set".into()));
    }
    let table = semantic_table(cfg, knowledge.bank.action_names())?;
    let y = if !cfg.use_semantics {
        vec![0.0f64; cfg.k_a * cfg.d]
    } else if params.train_y {
        params.block("y").data.clone()
    } else {
        table.table().data().iter().map(|&v| v as f64).collect()
    };
    let mut confusion = vec![vec![0u64; cfg.k_g]; cfg.k_g];
    for s in test {
        if s.group_label >= cfg.k_g {
            return Err(Error::LabelOutOfRange {
                index: s.group_label,
                bound: cfg.k_g,
            });
        }
        let cache = build_cache(s, knowledge, cfg)?;
        let probs = fused_probs(params, &cache, &y);
        confusion[s.group_label][argmax(&probs)] += 1;
    }
    Ok(Metrics::from_confusion(confusion))
}

/// Run-directory bookkeeping shared by the CLI commands: echoes the
/// resolved config (with version and config hash) into `dir`.
pub fn echo_config<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let resolved = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "config_hash": format!(
            "{:016x}",
            fnv1a(serde_json::to_string(config).expect("serializable").as_bytes())
        ),
    });
    let path = dir.join("config.json");
    let body = serde_json::to_string_pretty(&resolved)
        .map_err(|e| Error::Other(format!("serialize config: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

/// Path of the final checkpoint of a run directory.
pub fn last_checkpoint(run_dir: &Path) -> Result<PathBuf> {
    let dir = run_dir.join("checkpoints");
    let mut epochs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    epochs.sort();
    epochs.pop().ok_or_else(|| Error::Format {
        path: dir,
        detail: "no checkpoints".into(),
    })
}
