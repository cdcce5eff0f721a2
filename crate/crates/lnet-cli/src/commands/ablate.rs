//! `lnet ablate` — trains the four variants with a shared seed and emits an
//! ablation table with deltas against the CNN baseline.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use crate::commands::train::prepare;
use crate::commands::TrainFlags;
use lnet::train::{train, MetricsReport, TrainOutcome};

const VARIANTS: [&str; 4] = ["cnn", "lnet-minus", "lnet", "lnet-skd"];

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Serialize)]
struct AblateMeta {
    archive_sha256: String,
    base_config: crate::config::RunConfig,
}

pub fn run(args: &AblateArgs) -> Result<()> {
    if args.flags.variant.is_some() {
        bail!("--variant conflicts with ablate (it always runs all four variants)");
    }
    let prepared = prepare(&args.archive, &args.flags, args.subsample)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut rows: Vec<(String, Option<MetricsReport>)> = Vec::new();
    let mut failures = 0usize;
    for name in VARIANTS {
        let mut config = prepared.config.clone();
        config.variant = name.to_string();
        config.skd = name == "lnet-skd";
        let result: Result<TrainOutcome<f32>> =
            config.to_train_config().map_err(Into::into).and_then(|tc| train(&prepared.dataset, &tc).map_err(Into::into));
        match result {
            Ok(outcome) => {
                let r = &outcome.best_report;
                println!("{name}: accuracy {:.4}, macro F1 {:.4}, {} params", r.accuracy, r.macro_f1, r.params);
                rows.push((name.to_string(), Some(outcome.best_report)));
            }
            Err(e) => {
                println!("{name}: FAILED ({e:#})");
                rows.push((name.to_string(), None));
                failures += 1;
            }
        }
    }

    let baseline = rows.first().and_then(|(_, r)| r.clone());
    let mut csv = String::from(
        "variant,accuracy,macro_precision,macro_recall,macro_f1,params,flops,delta_accuracy,delta_precision,delta_recall,delta_f1\n",
    );
    for (name, report) in &rows {
        match report {
            Some(r) => {
                let delta = |field: fn(&MetricsReport) -> f64| -> f64 {
                    baseline.as_ref().map_or(0.0, |b| field(r) - field(b))
                };
                csv.push_str(&format!(
                    "{name},{:.6},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                    r.accuracy,
                    r.macro_precision,
                    r.macro_recall,
                    r.macro_f1,
                    r.params,
                    r.flops,
                    delta(|m| m.accuracy),
                    delta(|m| m.macro_precision),
                    delta(|m| m.macro_recall),
                    delta(|m| m.macro_f1),
                ));
            }
            None => csv.push_str(&format!("{name},,,,,,,,,,\n")),
        }
    }
    std::fs::write(args.out_dir.join("ablation.csv"), &csv)?;
    let meta =
        AblateMeta { archive_sha256: prepared.archive_sha256.clone(), base_config: prepared.config.clone() };
    std::fs::write(args.out_dir.join("ablate_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    if failures > 0 {
        bail!("{failures} of 4 variants failed (rows left empty in ablation.csv)");
    }
    Ok(())
}
