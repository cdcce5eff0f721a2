//! `lnet ingest` — raw dataset files → encoded archive + ingestion report.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::report::file_sha256;
use lnet::data::archive::{ingest_cicids, ingest_nslkdd, IngestOptions, IngestReport};
use lnet::data::NanPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NanFlag {
    Drop,
    Clamp,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// nslkdd or cicids2017.
    #[arg(long, value_parser = ["nslkdd", "cicids2017"])]
    pub dataset: String,
    /// Raw files or directories holding them (expanded to sorted *.txt /
    /// *.csv). May repeat.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Archive output path; the report lands next to it as
    /// `<out>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "train-fraction", default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Treatment of NaN/Infinity numeric fields (cicids2017 only).
    #[arg(long, value_enum, default_value = "drop")]
    pub nan: NanFlag,
}

/// Expands directories into sorted files with the dataset's extension.
fn collect_inputs(inputs: &[PathBuf], extension: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(extension)))
                .collect();
            found.sort();
            if found.is_empty() {
                bail!("no *.{extension} files under {}", input.display());
            }
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            bail!("input {} does not exist", input.display());
        }
    }
    if files.is_empty() {
        bail!("no input files");
    }
    Ok(files)
}

#[derive(Serialize)]
struct IngestReportFile<'a> {
    archive: String,
    archive_sha256: String,
    options: IngestOptionsEcho,
    #[serde(flatten)]
    report: &'a IngestReport,
}

#[derive(Serialize)]
struct IngestOptionsEcho {
    train_fraction: f64,
    seed: u64,
    nan_policy: NanPolicy,
}

pub fn run(args: &IngestArgs) -> Result<()> {
    let nan_policy = match args.nan {
        NanFlag::Drop => NanPolicy::Drop,
        NanFlag::Clamp => NanPolicy::Clamp,
    };
    let opts = IngestOptions { train_fraction: args.train_fraction, seed: args.seed, nan_policy };
    let (dataset, report) = match args.dataset.as_str() {
        "nslkdd" => {
            let files = collect_inputs(&args.input, "txt")?;
            ingest_nslkdd(&files, &opts)?
        }
        "cicids2017" => {
            let files = collect_inputs(&args.input, "csv")?;
            ingest_cicids(&files, &opts)?
        }
        other => bail!("unknown dataset {other:?}"),
    };

    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    dataset.write(&args.out)?;
    let sha = file_sha256(&args.out)?;
    let report_path = report_path_for(&args.out);
    let file = IngestReportFile {
        archive: args.out.display().to_string(),
        archive_sha256: sha,
        options: IngestOptionsEcho { train_fraction: args.train_fraction, seed: args.seed, nan_policy },
        report: &report,
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&file)? + "\n")?;

    println!("archive: {} ({} samples)", args.out.display(), report.encoded_samples);
    println!("report:  {}", report_path.display());
    for (name, count) in report.class_names.iter().zip(&report.class_counts) {
        println!("  {name:<12} {count}");
    }
    if report.dropped_nonfinite_rows > 0 {
        println!("  dropped non-finite rows: {}", report.dropped_nonfinite_rows);
    }
    for (label, count) in &report.excluded_labels {
        println!("  excluded label {label:?}: {count}");
    }
    if let Some(reference) = &report.reference {
        if reference.matches() {
            println!("  class totals match {} exactly", reference.source);
        } else {
            println!("  deviation from {}: {:?}", reference.source, reference.deviation);
        }
    }
    Ok(())
}

pub fn report_path_for(archive: &Path) -> PathBuf {
    let mut name = archive.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".report.json");
    archive.with_file_name(name)
}
