//! The self-distillation training loop.
//!
//! Batches come from the half-overlapping schedule: the first half of batch
//! `t` is the last half of batch `t−1`, and the soft predictions saved for
//! those samples in iteration `t−1` act as constant distillation targets in
//! iteration `t`. The first batch of every epoch has no teacher and skips
//! the KL term; teacher state never crosses an epoch's reshuffle.

pub mod sgd;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity;
use crate::data::archive::EncodedDataset;
use crate::data::schedule::overlap_batches;
use crate::error::{Error, Result};
use crate::loss::{temperature_softmax, ClassBalanceTable, SoftPrediction};
use crate::metrics::{macro_metrics, ConfusionMatrix};
use crate::nn::{build_model, Model, ModelConfig, Variant};
use crate::scalar::Real;
use crate::tensor::tape::Tape;
pub use sgd::{cosine_lr, sgd_step, OptimizerState};

/// All training hyperparameters. λ = 0 behaves exactly like
/// `skd_enabled = false` (the KL term is neither computed nor logged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub tau: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Temperature of the classification CE; defaults to the shared τ.
    pub ce_tau: Option<f64>,
    /// Rescale the class-balance weights to sum to the class count
    /// (`w·M/Σw`). Off by default: the raw coefficients shrink the CE term
    /// by ~(1−β) on large corpora, which is the formula as written.
    #[serde(default)]
    pub cb_normalize: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub variant: Variant,
    pub skd_enabled: bool,
}

impl TrainConfig {
    pub fn defaults(variant: Variant, skd_enabled: bool, lambda: f64) -> Self {
        TrainConfig {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            tau: 3.0,
            lambda,
            beta: 0.999,
            ce_tau: None,
            cb_normalize: false,
            epochs: 60,
            batch_size: 128,
            seed: 42,
            variant,
            skd_enabled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr0 <= 0.0 {
            return Err(Error::Config(format!("lr0 must be > 0, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if self.tau <= 0.0 {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if let Some(ct) = self.ce_tau {
            if ct <= 0.0 {
                return Err(Error::Config(format!("ce_tau must be > 0, got {ct}")));
            }
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must be in [0,1), got {}", self.beta)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 || (self.skd_active() && self.batch_size % 2 != 0) {
            return Err(Error::Config(format!(
                "batch_size must be >= 2 (and even with SKD), got {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// Whether the distillation term participates at all.
    pub fn skd_active(&self) -> bool {
        self.skd_enabled && self.lambda > 0.0
    }
}

/// Teacher predictions carried from the previous iteration, keyed by sample
/// id. Entries are plain probability tensors (`requires_grad` false, no grad
/// buffer) and are cleared at every epoch boundary.
#[derive(Debug, Clone, Default)]
pub struct SkdState<F: Real> {
    entries: BTreeMap<u32, SoftPrediction<F>>,
}

impl<F: Real> SkdState<F> {
    pub fn new() -> Self {
        SkdState { entries: BTreeMap::new() }
    }

    pub fn get(&self, id: u32) -> Option<&SoftPrediction<F>> {
        self.entries.get(&id)
    }

    pub fn insert(&mut self, id: u32, prediction: SoftPrediction<F>) {
        self.entries.insert(id, prediction);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Invariant check: no entry carries a gradient buffer or requires grad.
    pub fn entries_carry_no_grad(&self) -> bool {
        self.entries.values().all(|p| !p.probabilities().requires_grad() && p.probabilities().grad().is_none())
    }
}

/// Losses and training-accuracy counts from one iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationOutcome {
    pub loss_cb: f64,
    pub loss_skd: f64,
    pub correct: usize,
    pub samples: usize,
}

/// One optimization step over one batch: forward, Eq. 4 over the whole
/// batch, Eq. 5 over the shared prefix against stored teachers, Eq. 6,
/// backward, SGD update, then save the batch's trailing-half soft
/// predictions as next iteration's teachers.
#[allow(clippy::too_many_arguments)]
pub fn train_iteration<F: Real>(
    model: &mut Model<F>,
    opt: &mut OptimizerState<F>,
    dataset: &EncodedDataset,
    batch: &[u32],
    shared_prefix: usize,
    skd_state: &mut SkdState<F>,
    table: &ClassBalanceTable<F>,
    cfg: &TrainConfig,
    lr: f64,
    iteration: usize,
) -> Result<IterationOutcome> {
    let tau = F::from_f64_c(cfg.tau);
    let ce_tau = F::from_f64_c(cfg.ce_tau.unwrap_or(cfg.tau));
    let mut tape = Tape::new();
    let params = model.register_params(&mut tape);

    let mut logits = Vec::with_capacity(batch.len());
    let mut labels = Vec::with_capacity(batch.len());
    let mut weights = Vec::with_capacity(batch.len());
    let mut correct = 0usize;
    for &id in batch {
        let x = dataset.grid::<F>(id);
        let z = model.forward_recorded(&mut tape, &params, &x)?;
        let y = dataset.label(id);
        if tape.tensor(z).argmax() == y {
            correct += 1;
        }
        labels.push(y);
        weights.push(table.weight(y)?);
        logits.push(z);
    }

    let cb = tape.cb_ce_batch(&logits, &labels, &weights, ce_tau)?;
    let (total, skd_value) = if cfg.skd_active() && shared_prefix > 0 {
        let mut teachers = Vec::with_capacity(shared_prefix);
        for &id in &batch[..shared_prefix] {
            let t = skd_state.get(id).ok_or_else(|| Error::Training {
                iteration,
                detail: format!("no teacher prediction stored for shared sample {id}"),
            })?;
            teachers.push(t.probabilities().data().to_vec());
        }
        let skd = tape.skd_kl_batch(&logits[..shared_prefix], &teachers, tau)?;
        let total = tape.add_scaled(cb, skd, F::from_f64_c(cfg.lambda))?;
        (total, tape.value(skd)[0].to_f64().unwrap_or(f64::NAN))
    } else {
        (cb, 0.0)
    };

    let loss_cb = tape.value(cb)[0].to_f64().unwrap_or(f64::NAN);
    let loss_total = tape.value(total)[0].to_f64().unwrap_or(f64::NAN);
    if !loss_total.is_finite() {
        return Err(Error::Training {
            iteration,
            detail: format!("non-finite loss (lr {lr:.6}, cb {loss_cb}, skd {skd_value})"),
        });
    }

    model.params_mut().zero_grads();
    tape.backward(total)?;
    model.accumulate_grads_from(&tape, &params)?;
    sgd_step(
        model.params_mut(),
        opt,
        F::from_f64_c(lr),
        F::from_f64_c(cfg.momentum),
        F::from_f64_c(cfg.weight_decay),
    )?;

    // The trailing half of this batch leads the next one; its soft
    // predictions (pre-update logits, detached) become the teachers.
    if cfg.skd_active() && batch.len() == cfg.batch_size {
        let half = cfg.batch_size / 2;
        for (offset, &id) in batch[half..].iter().enumerate() {
            let z = tape.tensor(logits[half + offset]);
            skd_state.insert(id, temperature_softmax(&z, tau)?);
        }
    }

    Ok(IterationOutcome { loss_cb, loss_skd: skd_value, correct, samples: batch.len() })
}

/// Evaluation metrics plus the model's cost figures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub params: u64,
    pub flops: u64,
}

/// Full-pass argmax evaluation over the given ids, sharded across threads
/// with an ordered merge of integer confusion-matrix partials.
pub fn evaluate<F: Real>(model: &Model<F>, dataset: &EncodedDataset, ids: &[u32], batch_size: usize) -> Result<MetricsReport> {
    let g = dataset.geometry();
    if model.config().input_shape != g.as_tuple() {
        return Err(Error::shape(
            "evaluate",
            format!("model input {:?} vs archive geometry {:?}", model.config().input_shape, g.as_tuple()),
        ));
    }
    if ids.is_empty() {
        return Err(Error::invalid("evaluate", "no samples to evaluate"));
    }
    let m = dataset.num_classes();
    if model.num_classes() != m {
        return Err(Error::shape(
            "evaluate",
            format!("model has {} classes, archive {m}", model.num_classes()),
        ));
    }
    let chunk = batch_size.max(1);
    let partials: Vec<Result<ConfusionMatrix>> = ids
        .par_chunks(chunk)
        .map(|chunk_ids| {
            let mut cm = ConfusionMatrix::zeros(m);
            for &id in chunk_ids {
                let logits = model.forward(&dataset.grid::<F>(id))?;
                cm.record(dataset.label(id), logits.argmax())?;
            }
            Ok(cm)
        })
        .collect();
    let mut confusion = ConfusionMatrix::zeros(m);
    for partial in partials {
        confusion.merge(&partial?)?;
    }
    let mm = macro_metrics(&confusion)?;
    let params = complexity::count_params(model.config(), true)?.total_params;
    let flops = complexity::count_flops(model.config())?.total_macs;
    Ok(MetricsReport {
        confusion,
        accuracy: mm.accuracy,
        macro_precision: mm.macro_precision,
        macro_recall: mm.macro_recall,
        macro_f1: mm.macro_f1,
        params,
        flops,
    })
}

/// One row of the per-epoch training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_cb: f64,
    pub loss_skd: f64,
    pub train_acc: f64,
    pub eval_acc: f64,
    pub eval_macro_f1: f64,
}

/// Renders the log in the `train_log.csv` schema.
pub fn train_log_csv(rows: &[EpochLog]) -> String {
    let mut out = String::from("epoch,lr,loss_cb,loss_skd,train_acc,eval_acc,eval_macro_f1\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.epoch, r.lr, r.loss_cb, r.loss_skd, r.train_acc, r.eval_acc, r.eval_macro_f1
        ));
    }
    out
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome<F: Real> {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_model: Model<F>,
    pub best_report: MetricsReport,
    pub final_model: Model<F>,
    pub final_report: MetricsReport,
}

impl<F: Real> TrainOutcome<F> {
    pub fn log_csv(&self) -> String {
        train_log_csv(&self.epochs)
    }
}

/// Two stacked DeepMax blocks (32 → 64 pre-MFM channels) over the given
/// input geometry; the default topology for every dataset.
pub fn model_config_for(variant: Variant, input_shape: (usize, usize, usize), num_classes: usize) -> ModelConfig {
    let (c, _, _) = input_shape;
    ModelConfig {
        variant,
        input_shape,
        blocks: vec![
            crate::nn::DeepMaxBlockConfig {
                in_channels: c,
                conv_out_channels: 32,
                kernel_size: 3,
                padding: 1,
                use_mfm: true,
                pool: true,
            },
            crate::nn::DeepMaxBlockConfig {
                in_channels: 16,
                conv_out_channels: 64,
                kernel_size: 3,
                padding: 1,
                use_mfm: true,
                pool: true,
            },
        ],
        num_classes,
    }
}

/// Trains the config's variant on the archive's train split and evaluates on
/// its eval split each epoch. Deterministic for fixed `(archive, config)`.
pub fn train<F: Real>(dataset: &EncodedDataset, cfg: &TrainConfig) -> Result<TrainOutcome<F>> {
    let g = dataset.geometry();
    let model_config = model_config_for(cfg.variant, g.as_tuple(), dataset.num_classes());
    train_with_model_config(dataset, &model_config, cfg)
}

/// As [`train`] but with an explicit architecture.
pub fn train_with_model_config<F: Real>(
    dataset: &EncodedDataset,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if model_config.variant != cfg.variant {
        return Err(Error::Config(format!(
            "model config variant {:?} does not match train config {:?}",
            model_config.variant, cfg.variant
        )));
    }
    let mut model = build_model::<F>(model_config, cfg.seed)?;
    let train_ids = dataset.train_ids();
    let eval_ids = dataset.eval_ids();
    if train_ids.is_empty() {
        return Err(Error::invalid("train", "archive has no training samples"));
    }
    if eval_ids.is_empty() {
        return Err(Error::invalid("train", "archive has no evaluation samples"));
    }
    let counts = dataset.train_class_counts_nonzero();
    let table = if cfg.cb_normalize {
        ClassBalanceTable::<F>::new_normalized(cfg.beta, &counts)?
    } else {
        ClassBalanceTable::<F>::new(cfg.beta, &counts)?
    };
    let mut opt = OptimizerState::new(model.params());
    let mut skd_state = SkdState::new();

    let batches_per_epoch = overlap_batches(train_ids, cfg.batch_size, cfg.seed, 0)?.num_batches();
    let total_steps = cfg.epochs * batches_per_epoch;

    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, Model<F>, MetricsReport)> = None;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let schedule = overlap_batches(train_ids, cfg.batch_size, cfg.seed, epoch as u64)?;
        skd_state.clear();
        let mut epoch_lr = 0.0;
        let mut cb_sum = 0.0;
        let mut skd_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for t in 0..schedule.num_batches() {
            let lr = cosine_lr(step, total_steps, cfg.lr0)?;
            if t == 0 {
                epoch_lr = lr;
            }
            let out = train_iteration(
                &mut model,
                &mut opt,
                dataset,
                schedule.batch(t),
                schedule.shared_prefix_len(t),
                &mut skd_state,
                &table,
                cfg,
                lr,
                step,
            )?;
            cb_sum += out.loss_cb;
            skd_sum += out.loss_skd;
            correct += out.correct;
            seen += out.samples;
            step += 1;
        }
        let report = evaluate(&model, dataset, eval_ids, cfg.batch_size)?;
        let row = EpochLog {
            epoch: epoch + 1,
            lr: epoch_lr,
            loss_cb: cb_sum / batches_per_epoch as f64,
            loss_skd: skd_sum / batches_per_epoch as f64,
            train_acc: correct as f64 / seen as f64,
            eval_acc: report.accuracy,
            eval_macro_f1: report.macro_f1,
        };
        let is_better = best.as_ref().map_or(true, |(_, _, b)| report.accuracy > b.accuracy);
        if is_better {
            best = Some((epoch + 1, model.clone(), report));
        }
        rows.push(row);
    }
    let (best_epoch, best_model, best_report) = best.expect("at least one epoch ran");
    let final_report = evaluate(&model, dataset, eval_ids, cfg.batch_size)?;
    Ok(TrainOutcome { epochs: rows, best_epoch, best_model, best_report, final_model: model, final_report })
}
