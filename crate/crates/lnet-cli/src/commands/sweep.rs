//! `lnet sweep` — one training run per hyperparameter value, shared seed.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::commands::train::prepare;
use crate::commands::TrainFlags;
use lnet::train::{train, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Tau,
    Lambda,
    Beta,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Lambda => "lambda",
            SweepParam::Beta => "beta",
        }
    }
}

/// Preset grids: τ ∈ {1,3,5,10} with λ fixed at 1, and λ ∈ {0.5,1,2,4} with
/// τ fixed at 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepPreset {
    Tau,
    Lambda,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// Which hyperparameter to vary.
    #[arg(long, value_enum, required_unless_present = "preset")]
    pub param: Option<SweepParam>,
    /// Comma-separated values, e.g. `1,3,5,10`.
    #[arg(long, value_delimiter = ',', required_unless_present = "preset")]
    pub values: Option<Vec<f64>>,
    /// Shipped grid reproducing the hyperparameter study.
    #[arg(long, value_enum, conflicts_with_all = ["param", "values"])]
    pub preset: Option<SweepPreset>,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Serialize)]
struct SweepMeta {
    archive_sha256: String,
    param: String,
    values: Vec<f64>,
    base_config: crate::config::RunConfig,
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let (param, values, pin) = match (args.preset, args.param, &args.values) {
        (Some(SweepPreset::Tau), _, _) => (SweepParam::Tau, vec![1.0, 3.0, 5.0, 10.0], Some(("lambda", 1.0))),
        (Some(SweepPreset::Lambda), _, _) => (SweepParam::Lambda, vec![0.5, 1.0, 2.0, 4.0], Some(("tau", 3.0))),
        (None, Some(p), Some(v)) if !v.is_empty() => (p, v.clone(), None),
        _ => bail!("need --preset, or --param with non-empty --values"),
    };

    let prepared = prepare(&args.archive, &args.flags, args.subsample)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut csv = String::from("param_value,accuracy,macro_f1\n");
    let mut failures: Vec<(f64, String)> = Vec::new();
    for &value in &values {
        let mut config = prepared.config.clone();
        match param {
            SweepParam::Tau => config.tau = value,
            SweepParam::Lambda => config.lambda = value,
            SweepParam::Beta => config.beta = value,
        }
        match pin {
            Some(("lambda", v)) => config.lambda = v,
            Some(("tau", v)) => config.tau = v,
            _ => {}
        }
        let result: Result<TrainOutcome<f32>> =
            config.to_train_config().map_err(Into::into).and_then(|tc| train(&prepared.dataset, &tc).map_err(Into::into));
        match result {
            Ok(outcome) => {
                let r = &outcome.best_report;
                csv.push_str(&format!("{value},{:.6},{:.6}\n", r.accuracy, r.macro_f1));
                println!("{} = {value}: accuracy {:.4}, macro F1 {:.4}", param.name(), r.accuracy, r.macro_f1);
            }
            Err(e) => {
                println!("{} = {value}: FAILED ({e:#})", param.name());
                failures.push((value, format!("{e:#}")));
            }
        }
    }

    std::fs::write(args.out_dir.join("sweep.csv"), &csv)?;
    let meta = SweepMeta {
        archive_sha256: prepared.archive_sha256.clone(),
        param: param.name().to_string(),
        values: values.clone(),
        base_config: prepared.config.clone(),
    };
    std::fs::write(args.out_dir.join("sweep_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    if !failures.is_empty() {
        let report: Vec<_> = failures.iter().map(|(v, e)| serde_json::json!({"value": v, "error": e})).collect();
        std::fs::write(args.out_dir.join("sweep_errors.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        bail!("{} of {} sweep runs failed (recorded in sweep_errors.json)", failures.len(), values.len());
    }
    Ok(())
}
