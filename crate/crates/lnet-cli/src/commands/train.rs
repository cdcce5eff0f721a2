//! `lnet train` — one training run: best checkpoint, final weights,
//! train_log.csv and metrics.json.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

use crate::commands::TrainFlags;
use crate::config::RunConfig;
use crate::report::{file_sha256, MetricsJson};
use lnet::data::archive::{subsample, EncodedDataset};
use lnet::nn::serial::save_model;
use lnet::train::{train, TrainOutcome};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Encoded archive produced by `lnet ingest`.
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    /// Stratified per-class fraction of the archive to keep before
    /// splitting (e.g. 0.1 for a 10% subsample run).
    #[arg(long)]
    pub subsample: Option<f64>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

pub struct PreparedRun {
    pub dataset: EncodedDataset,
    pub config: RunConfig,
    pub archive_sha256: String,
}

/// Loads the archive, resolves the run config against its header and applies
/// the optional subsample.
pub fn prepare(archive_path: &Path, flags: &TrainFlags, fraction: Option<f64>) -> Result<PreparedRun> {
    let sha = file_sha256(archive_path)?;
    let mut dataset =
        EncodedDataset::read(archive_path).with_context(|| format!("reading archive {}", archive_path.display()))?;
    let name = dataset.header().dataset.clone();
    let mut config = flags.resolve(&name)?;
    config.train_fraction = dataset.header().split.train_fraction;
    if let Some(f) = fraction {
        dataset = subsample(&dataset, f, config.seed)?;
    }
    Ok(PreparedRun { dataset, config, archive_sha256: sha })
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let prepared = prepare(&args.archive, &args.flags, args.subsample)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let outcome: TrainOutcome<f32> = train(&prepared.dataset, &prepared.config.to_train_config()?)?;
    write_artifacts(&args.out_dir, &prepared, &outcome)?;
    let best = &outcome.best_report;
    println!(
        "best epoch {} — accuracy {:.4}, macro F1 {:.4} ({} params, {} FLOPs)",
        outcome.best_epoch, best.accuracy, best.macro_f1, best.params, best.flops
    );
    println!("artifacts under {}", args.out_dir.display());
    Ok(())
}

pub fn write_artifacts(out_dir: &Path, prepared: &PreparedRun, outcome: &TrainOutcome<f32>) -> Result<()> {
    std::fs::write(out_dir.join("train_log.csv"), outcome.log_csv())?;
    save_model(&outcome.best_model, out_dir.join("model.lnsk"))?;
    save_model(&outcome.final_model, out_dir.join("model_final.lnsk"))?;
    let metrics = MetricsJson::new(
        &prepared.config,
        &prepared.archive_sha256,
        Some(outcome.best_epoch),
        &outcome.best_report,
    );
    metrics.write(&out_dir.join("metrics.json"))?;
    Ok(())
}
