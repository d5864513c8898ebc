use std::path::PathBuf;

use clap::{Args, ValueEnum};
use escfr_core::baselines::{knn_cate, ols_slearner, DEFAULT_RIDGE};
use escfr_core::data::{load_dataset_csv, split_dataset, SplitRatios};
use escfr_core::eval::{auuc, factual_rmse, pehe_metrics, MetricReport, SplitTag};
use escfr_core::nn::load_checkpoint;
use escfr_core::training::metric_report;
use ndarray::Array1;

use crate::error::{input, CliResult};
use crate::io::{append_metrics, read_json};
use crate::train::{RunManifest, MANIFEST};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Ols,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

impl SplitArg {
    fn tag(self) -> SplitTag {
        match self {
            SplitArg::Train => SplitTag::InSample,
            SplitArg::Valid => SplitTag::Validation,
            SplitArg::Test => SplitTag::OutSample,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, conflicts_with = "estimator", required_unless_present = "estimator")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub estimator: Option<Estimator>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Split seed. Defaults to the seed in the checkpoint's run manifest, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Neighbours per arm for the knn estimator.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value = "metrics.csv")]
    pub metrics: PathBuf,
}

fn manifest_seed(checkpoint: &std::path::Path) -> Option<u64> {
    let path = checkpoint.parent()?.join(MANIFEST);
    read_json::<RunManifest>(&path, "manifest").ok().map(|m| m.seed)
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let data = load_dataset_csv(&args.data)?;
    let seed = args
        .seed
        .or_else(|| args.checkpoint.as_deref().and_then(manifest_seed))
        .unwrap_or(0);
    let (train, valid, test) = split_dataset(&data, SplitRatios::default(), seed)?;
    let part = match args.split {
        SplitArg::Train => &train,
        SplitArg::Valid => &valid,
        SplitArg::Test => &test,
    };
    let tag = args.split.tag();

    let (source, report) = match (&args.checkpoint, args.estimator) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(input(format!("checkpoint {} not found", path.display())));
            }
            let (model, _) = load_checkpoint(path)?;
            ("checkpoint".to_string(), metric_report(&model, part, tag)?)
        }
        (None, Some(Estimator::Ols)) => {
            let model = ols_slearner(&train, DEFAULT_RIDGE)?;
            println!("treatment_coef {}", model.treatment_coef);
            let tau = model.predict_cate(part.x.view())?;
            let (y0, y1) = (model.predict(part.x.view(), false)?, model.predict(part.x.view(), true)?);
            let yhat: Array1<f64> = (0..part.len()).map(|i| if part.t[i] { y1[i] } else { y0[i] }).collect();
            ("ols".to_string(), baseline_report(&tau, &yhat, part, tag)?)
        }
        (None, Some(Estimator::Knn)) => {
            let tau = knn_cate(&train, args.k, part.x.view())?;
            // Factual fit for kNN is the training arm mean.
            let yhat = arm_means(&train, part);
            ("knn".to_string(), baseline_report(&tau, &yhat, part, tag)?)
        }
        (None, None) => return Err(input("either --checkpoint or --estimator is required")),
    };
    append_metrics(&args.metrics, &source, &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn arm_means(train: &escfr_core::data::CausalDataset, part: &escfr_core::data::CausalDataset) -> Array1<f64> {
    let mean = |want: bool| {
        let v: Vec<f64> = (0..train.len()).filter(|&i| train.t[i] == want).map(|i| train.y[i]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (m0, m1) = (mean(false), mean(true));
    part.t.iter().map(|&t| if t { m1 } else { m0 }).collect()
}

fn baseline_report(
    tau_hat: &Array1<f64>,
    yhat: &Array1<f64>,
    part: &escfr_core::data::CausalDataset,
    split: SplitTag,
) -> CliResult<MetricReport> {
    let (pehe, sqrt_pehe) = match &part.tau {
        Some(tau) => {
            let (p, s) = pehe_metrics(tau_hat.view(), tau.view())?;
            (Some(p), Some(s))
        }
        None => (None, None),
    };
    Ok(MetricReport {
        pehe,
        sqrt_pehe,
        auuc: auuc(tau_hat.view(), &part.t, part.y.view())?,
        factual_rmse: factual_rmse(yhat.view(), part.y.view())?,
        split,
    })
}
