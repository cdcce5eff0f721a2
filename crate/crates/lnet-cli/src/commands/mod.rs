pub mod ablate;
pub mod count;
pub mod eval;
pub mod ingest;
pub mod sweep;
pub mod train;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};

use crate::config::{PartialConfig, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkdFlag {
    On,
    Off,
}

/// Hyperparameter flags shared by train/sweep/ablate; each overrides the
/// config file's value.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// JSON config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// lnet, lnet-skd, cnn or lnet-minus.
    #[arg(long)]
    pub variant: Option<String>,
    /// Distillation temperature τ.
    #[arg(long)]
    pub tau: Option<f64>,
    /// SKD loss weight λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Class-balance coefficient β.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Temperature of the classification CE (defaults to τ).
    #[arg(long = "ce-tau")]
    pub ce_tau: Option<f64>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long = "weight-decay")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Master seed for every random choice of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Force self-distillation on or off (default follows the variant).
    #[arg(long, value_enum)]
    pub skd: Option<SkdFlag>,
    /// Rescale class-balance weights to sum to the class count.
    #[arg(long = "cb-normalize")]
    pub cb_normalize: Option<bool>,
}

impl TrainFlags {
    fn as_partial(&self) -> PartialConfig {
        PartialConfig {
            variant: self.variant.clone(),
            tau: self.tau,
            lambda: self.lambda,
            beta: self.beta,
            ce_tau: self.ce_tau,
            lr0: self.lr0,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            skd: self.skd.map(|s| s == SkdFlag::On),
            cb_normalize: self.cb_normalize,
            train_fraction: None,
        }
    }

    /// File config overridden by flags.
    pub fn partial(&self) -> Result<PartialConfig> {
        let base = match &self.config {
            Some(path) => PartialConfig::from_file(path)?,
            None => PartialConfig::default(),
        };
        Ok(base.overridden_by(&self.as_partial()))
    }

    pub fn resolve(&self, dataset: &str) -> Result<RunConfig> {
        Ok(RunConfig::resolve(&self.partial()?, dataset)?)
    }
}
