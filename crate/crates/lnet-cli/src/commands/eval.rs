//! `lnet eval` — evaluation-only report for a saved model.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};

use crate::config::{PartialConfig, RunConfig};
use crate::report::{confusion_csv, file_sha256, MetricsJson};
use lnet::data::archive::EncodedDataset;
use lnet::nn::serial::load_model;
use lnet::train::evaluate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    /// Every sample in the archive.
    All,
    Train,
    Eval,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file in the LNSK format.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    /// Which samples to score.
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitChoice,
    #[arg(long = "batch-size", default_value_t = 256)]
    pub batch_size: usize,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let sha = file_sha256(&args.archive)?;
    let dataset =
        EncodedDataset::read(&args.archive).with_context(|| format!("reading archive {}", args.archive.display()))?;
    let model = load_model::<f32>(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let all_ids: Vec<u32> = (0..dataset.num_samples() as u32).collect();
    let ids: &[u32] = match args.split {
        SplitChoice::All => &all_ids,
        SplitChoice::Train => dataset.train_ids(),
        SplitChoice::Eval => dataset.eval_ids(),
    };
    let report = evaluate(&model, &dataset, ids, args.batch_size)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let partial = PartialConfig {
        variant: Some(model.config().variant.as_str().replace('_', "-")),
        seed: Some(model.seed()),
        ..Default::default()
    };
    let mut config = RunConfig::resolve(&partial, &dataset.header().dataset)?;
    config.train_fraction = dataset.header().split.train_fraction;
    MetricsJson::new(&config, &sha, None, &report).write(&args.out_dir.join("metrics.json"))?;
    std::fs::write(
        args.out_dir.join("confusion.csv"),
        confusion_csv(&report.confusion, &dataset.header().label_map),
    )?;
    println!(
        "accuracy {:.4}, macro P {:.4}, macro R {:.4}, macro F1 {:.4} over {} samples",
        report.accuracy,
        report.macro_precision,
        report.macro_recall,
        report.macro_f1,
        ids.len()
    );
    Ok(())
}
