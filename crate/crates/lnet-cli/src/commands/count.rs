//! `lnet count` — parameter/MAC accounting for a model configuration.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use crate::config::parse_variant;
use lnet::complexity::{count_flops, count_params, ComplexityReport};
use lnet::nn::{ModelConfig, Variant};
use lnet::train::model_config_for;

#[derive(Debug, Args)]
pub struct CountArgs {
    /// Use the default geometry of this dataset (nslkdd or cicids2017).
    #[arg(long, value_parser = ["nslkdd", "cicids2017"], default_value = "nslkdd")]
    pub dataset: String,
    /// lnet, lnet-skd, cnn or lnet-minus.
    #[arg(long, default_value = "lnet")]
    pub variant: String,
    /// Derive geometry and class count from an encoded archive instead of
    /// the dataset defaults.
    #[arg(long, conflicts_with = "model_config")]
    pub archive: Option<PathBuf>,
    /// Explicit architecture (ModelConfig JSON) instead of the defaults.
    #[arg(long = "model-config")]
    pub model_config: Option<PathBuf>,
    /// Where to write the JSON report.
    #[arg(long, default_value = "complexity.json")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CountReport {
    config: ModelConfig,
    report: ComplexityReport,
    report_bias_free: ComplexityReport,
    standard_conv_comparison: StandardComparison,
}

#[derive(Serialize)]
struct StandardComparison {
    standard_params: u64,
    params_ratio: f64,
    standard_macs: u64,
    macs_ratio: f64,
}

pub fn run(args: &CountArgs) -> Result<()> {
    let config = match (&args.model_config, &args.archive) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg: ModelConfig = serde_json::from_str(&text)?;
            cfg.validate()?;
            cfg
        }
        (None, Some(archive)) => {
            let ds = lnet::data::archive::EncodedDataset::read(archive)
                .with_context(|| format!("reading archive {}", archive.display()))?;
            let (variant, _) = parse_variant(&args.variant)?;
            model_config_for(variant, ds.geometry().as_tuple(), ds.num_classes())
        }
        (None, None) => {
            let (variant, _) = parse_variant(&args.variant)?;
            match args.dataset.as_str() {
                "cicids2017" => model_config_for(variant, (1, 9, 9), 6),
                _ => model_config_for(variant, (1, 12, 12), 5),
            }
        }
    };

    let report = count_flops(&config)?;
    let bias_free = count_params(&config, false)?;
    let mut standard_cfg = config.clone();
    standard_cfg.variant = Variant::Cnn;
    let standard = count_flops(&standard_cfg)?;

    println!("{:<22} {:>10} {:>12} {:>12}", "layer", "params", "MACs", "comparisons");
    for l in &report.layers {
        println!("{:<22} {:>10} {:>12} {:>12}", l.name, l.params, l.macs, l.comparisons);
    }
    println!("{:<22} {:>10} {:>12} {:>12}", "total", report.total_params, report.total_macs, report.total_comparisons);
    println!("FLOPs (1 MAC = 1 FLOP): {}", report.total_macs);
    println!("FLOPs (2 per MAC):      {}", report.total_flops_2x);
    let comparison = StandardComparison {
        standard_params: standard.total_params,
        params_ratio: report.total_params as f64 / standard.total_params as f64,
        standard_macs: standard.total_macs,
        macs_ratio: report.total_macs as f64 / standard.total_macs as f64,
    };
    println!(
        "vs standard-convolution topology: params {} ({:.3}x), MACs {} ({:.3}x)",
        comparison.standard_params, comparison.params_ratio, comparison.standard_macs, comparison.macs_ratio
    );

    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let full = CountReport { config, report, report_bias_free: bias_free, standard_conv_comparison: comparison };
    std::fs::write(&args.out, serde_json::to_string_pretty(&full)? + "\n")?;
    Ok(())
}
