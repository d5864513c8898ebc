use std::path::{Path, PathBuf};

use clap::Args;
use escfr_core::data::{load_dataset_csv, split_dataset, CausalDataset, SplitRatios};
use escfr_core::eval::{MetricReport, SplitTag};
use escfr_core::nn::save_checkpoint;
use escfr_core::training::{fit, metric_report, FitOutcome, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{input, CliResult};
use crate::io::{append_metrics, ensure_dir, read_bytes, sha256_hex, write_json};

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const CHECKPOINT: &str = "best.ckpt";
pub const METRICS: &str = "metrics.csv";
pub const TIMING: &str = "timing.json";

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Training config JSON; absent fields take their defaults.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifacts {
    pub report: String,
    pub checkpoint: String,
    pub metrics: String,
    pub timing: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: TrainConfig,
    /// SHA-256 of the compact JSON serialization of `config`.
    pub config_hash: String,
    /// SHA-256 of the dataset file bytes.
    pub dataset_fingerprint: String,
    pub dataset: String,
    pub seed: u64,
    pub artifacts: Artifacts,
}

pub fn config_hash(cfg: &TrainConfig) -> CliResult<String> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

pub fn parse_config(bytes: &[u8], origin: &Path) -> CliResult<TrainConfig> {
    let cfg: TrainConfig =
        serde_json::from_slice(bytes).map_err(|e| input(format!("invalid config {}: {e}", origin.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// A fitted model with its validation and held-out metrics.
pub struct Evaluated {
    pub outcome: FitOutcome,
    pub valid: MetricReport,
    pub test: MetricReport,
}

pub fn train_and_evaluate(data: &CausalDataset, cfg: &TrainConfig) -> escfr_core::Result<Evaluated> {
    let (train, valid, test) = split_dataset(data, SplitRatios::default(), cfg.seed)?;
    let outcome = fit(&train, &valid, cfg)?;
    let valid = metric_report(&outcome.model, &valid, SplitTag::Validation)?;
    let test = metric_report(&outcome.model, &test, SplitTag::OutSample)?;
    Ok(Evaluated { outcome, valid, test })
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let data_bytes = read_bytes(&args.data, "dataset")?;
    let data = load_dataset_csv(&args.data)?;
    let cfg = parse_config(&read_bytes(&args.config, "config")?, &args.config)?;
    ensure_dir(&args.out)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(&cfg)?,
        dataset_fingerprint: sha256_hex(&data_bytes),
        dataset: args.data.display().to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        artifacts: Artifacts {
            report: REPORT.into(),
            checkpoint: CHECKPOINT.into(),
            metrics: METRICS.into(),
            timing: TIMING.into(),
        },
    };
    write_json(&args.out.join(MANIFEST), &manifest)?;

    let Evaluated { mut outcome, valid, test } = train_and_evaluate(&data, &cfg)?;
    save_checkpoint(&outcome.model, &manifest.config_hash, args.out.join(CHECKPOINT))?;
    outcome.report.checkpoint = Some(CHECKPOINT.into());
    write_json(&args.out.join(REPORT), &outcome.report)?;
    write_json(&args.out.join(TIMING), &serde_json::json!({ "epoch_seconds": outcome.report.epoch_seconds }))?;
    let metrics = args.out.join(METRICS);
    if metrics.exists() {
        std::fs::remove_file(&metrics)?;
    }
    append_metrics(&metrics, outcome.report.estimator.as_str(), &valid)?;

    println!(
        "{}: best epoch {} (metric {:.6}), stopped at {}; validation auuc {:.4}",
        outcome.report.estimator,
        outcome.report.best_epoch,
        outcome.report.best_metric,
        outcome.report.stopped_epoch,
        valid.auuc
    );
    if let Some(s) = test.sqrt_pehe {
        println!("held-out sqrt_pehe {s:.6}");
    }
    Ok(())
}
