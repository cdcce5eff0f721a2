//! Run configuration: JSON config file + CLI flag overrides resolved into a
//! concrete, serializable [`RunConfig`] that every report embeds verbatim.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lnet::nn::Variant;
use lnet::train::TrainConfig;

/// Partially specified knobs, as they appear in a config file or on the
/// command line. `None` means "use the default".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub variant: Option<String>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub ce_tau: Option<f64>,
    pub lr0: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub skd: Option<bool>,
    pub cb_normalize: Option<bool>,
    pub train_fraction: Option<f64>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Field-wise override: values in `over` win.
    pub fn overridden_by(mut self, over: &PartialConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f.clone(); } )* };
        }
        take!(variant, tau, lambda, beta, ce_tau, lr0, momentum, weight_decay, epochs, batch_size, seed, skd, cb_normalize, train_fraction);
        self
    }
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: String,
    pub variant: String,
    pub tau: f64,
    pub lambda: f64,
    pub beta: f64,
    pub ce_tau: Option<f64>,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub skd: bool,
    pub cb_normalize: bool,
    pub train_fraction: f64,
}

/// Maps the CLI variant name to the architecture and its default SKD switch.
pub fn parse_variant(name: &str) -> Result<(Variant, bool)> {
    Ok(match name {
        "lnet" => (Variant::Lnet, false),
        "lnet-skd" => (Variant::Lnet, true),
        "cnn" => (Variant::Cnn, false),
        "lnet-minus" => (Variant::LnetMinus, false),
        other => bail!("unknown variant {other:?} (expected lnet, lnet-skd, cnn or lnet-minus)"),
    })
}

impl RunConfig {
    /// Applies defaults: τ=3, β=0.999, lr0=0.1, momentum=0.9, wd=1e-4,
    /// epochs=60, batch=128, seed=42; λ defaults to 2 except 1 on
    /// cicids2017; `lnet-skd` turns SKD on unless --skd overrides.
    pub fn resolve(partial: &PartialConfig, dataset: &str) -> Result<RunConfig> {
        let variant = partial.variant.clone().unwrap_or_else(|| "lnet-skd".to_string());
        let (_, skd_default) = parse_variant(&variant)?;
        let lambda_default = if dataset == "cicids2017" { 1.0 } else { 2.0 };
        let cfg = RunConfig {
            dataset: dataset.to_string(),
            variant,
            tau: partial.tau.unwrap_or(3.0),
            lambda: partial.lambda.unwrap_or(lambda_default),
            beta: partial.beta.unwrap_or(0.999),
            ce_tau: partial.ce_tau,
            lr0: partial.lr0.unwrap_or(0.1),
            momentum: partial.momentum.unwrap_or(0.9),
            weight_decay: partial.weight_decay.unwrap_or(1e-4),
            epochs: partial.epochs.unwrap_or(60),
            batch_size: partial.batch_size.unwrap_or(128),
            seed: partial.seed.unwrap_or(42),
            skd: partial.skd.unwrap_or(skd_default),
            cb_normalize: partial.cb_normalize.unwrap_or(false),
            train_fraction: partial.train_fraction.unwrap_or(0.8),
        };
        cfg.to_train_config()?; // validates
        Ok(cfg)
    }

    pub fn to_train_config(&self) -> Result<TrainConfig> {
        let (arch, _) = parse_variant(&self.variant)?;
        let cfg = TrainConfig {
            lr0: self.lr0,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            tau: self.tau,
            lambda: self.lambda,
            beta: self.beta,
            ce_tau: self.ce_tau,
            cb_normalize: self.cb_normalize,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            variant: arch,
            skd_enabled: self.skd,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
