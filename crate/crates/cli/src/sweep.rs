use std::path::PathBuf;

use clap::Args;
use escfr_core::data::load_dataset_csv;
use escfr_core::ot::Relaxation;
use escfr_core::training::TrainConfig;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{input, CliError, CliResult};
use crate::io::{create, ensure_dir, read_json};
use crate::train::train_and_evaluate;

pub const RUNS_CSV: &str = "runs.csv";
pub const RESULTS_CSV: &str = "results.csv";
pub const THREADS_ENV: &str = "ESCFR_THREADS";

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Grid JSON: value lists for lambda, epsilon, kappa, gamma, batch_size, plus seeds and a base config.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lambda: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
    pub kappa: Option<Vec<Relaxation<f64>>>,
    pub gamma: Option<Vec<f64>>,
    pub batch_size: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lambda: f64,
    pub epsilon: f64,
    pub kappa: Relaxation<f64>,
    pub gamma: f64,
    pub batch_size: usize,
}

impl Cell {
    fn config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
            kappa: self.kappa,
            gamma: self.gamma,
            batch_size: self.batch_size,
            seed,
            ..base.clone()
        }
    }

    fn fields(&self) -> [String; 5] {
        [
            self.lambda.to_string(),
            self.epsilon.to_string(),
            self.kappa.to_string(),
            self.gamma.to_string(),
            self.batch_size.to_string(),
        ]
    }
}

impl Grid {
    /// Cartesian product in lambda, epsilon, kappa, gamma, batch_size order.
    pub fn cells(&self) -> Vec<Cell> {
        let b = &self.base;
        let lambdas = self.lambda.clone().unwrap_or_else(|| vec![b.lambda]);
        let epsilons = self.epsilon.clone().unwrap_or_else(|| vec![b.epsilon]);
        let kappas = self.kappa.clone().unwrap_or_else(|| vec![b.kappa]);
        let gammas = self.gamma.clone().unwrap_or_else(|| vec![b.gamma]);
        let sizes = self.batch_size.clone().unwrap_or_else(|| vec![b.batch_size]);
        let mut out = Vec::new();
        for &lambda in &lambdas {
            for &epsilon in &epsilons {
                for &kappa in &kappas {
                    for &gamma in &gammas {
                        for &batch_size in &sizes {
                            out.push(Cell {
                                lambda,
                                epsilon,
                                kappa,
                                gamma,
                                batch_size,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.base.seed])
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub cell: usize,
    pub seed: u64,
    pub result: std::result::Result<RunMetrics, (bool, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunMetrics {
    pub sqrt_pehe: Option<f64>,
    pub pehe: Option<f64>,
    pub auuc: f64,
    pub factual_rmse: f64,
    pub best_epoch: usize,
}

/// Worker count: `--jobs`, capped by the environment variable when set.
pub fn worker_count(jobs: usize) -> CliResult<usize> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| input(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    Ok(cap.map_or(jobs, |c| jobs.min(c)).max(1))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn run(args: &SweepArgs) -> CliResult<()> {
    let data = load_dataset_csv(&args.data)?;
    let grid: Grid = read_json(&args.grid, "grid")?;
    let cells = grid.cells();
    let seeds = grid.seeds();
    if seeds.is_empty() {
        return Err(input("grid `seeds` is empty"));
    }
    ensure_dir(&args.out)?;

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(args.jobs)?)
        .build()
        .map_err(|e| input(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, seed)| {
                let cfg = cells[cell].config(&grid.base, seed);
                let result = cfg
                    .validate()
                    .and_then(|_| train_and_evaluate(&data, &cfg))
                    .map(|ev| RunMetrics {
                        sqrt_pehe: ev.test.sqrt_pehe,
                        pehe: ev.test.pehe,
                        auuc: ev.test.auuc,
                        factual_rmse: ev.test.factual_rmse,
                        best_epoch: ev.outcome.report.best_epoch,
                    })
                    .map_err(|e| (e.is_numerical(), e.to_string()));
                RunOutcome { cell, seed, result }
            })
            .collect()
    });

    let mut runs = csv::Writer::from_writer(create(&args.out.join(RUNS_CSV))?);
    runs.write_record([
        "lambda", "epsilon", "kappa", "gamma", "batch_size", "seed", "status", "sqrt_pehe", "pehe", "auuc",
        "factual_rmse", "best_epoch", "error",
    ])?;
    for o in &outcomes {
        let mut rec: Vec<String> = cells[o.cell].fields().to_vec();
        rec.push(o.seed.to_string());
        match &o.result {
            Ok(m) => rec.extend([
                "ok".to_string(),
                m.sqrt_pehe.map(fmt).unwrap_or_default(),
                m.pehe.map(fmt).unwrap_or_default(),
                fmt(m.auuc),
                fmt(m.factual_rmse),
                m.best_epoch.to_string(),
                String::new(),
            ]),
            Err((_, msg)) => {
                rec.extend(["failed".to_string()]);
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push(msg.clone());
            }
        }
        runs.write_record(&rec)?;
    }
    runs.flush()?;

    let mut results = csv::Writer::from_writer(create(&args.out.join(RESULTS_CSV))?);
    results.write_record([
        "lambda",
        "epsilon",
        "kappa",
        "gamma",
        "batch_size",
        "estimator",
        "runs",
        "failures",
        "sqrt_pehe_mean",
        "sqrt_pehe_std",
        "pehe_mean",
        "pehe_std",
        "auuc_mean",
        "auuc_std",
        "factual_rmse_mean",
        "factual_rmse_std",
    ])?;
    for (c, cell) in cells.iter().enumerate() {
        let ok: Vec<RunMetrics> = outcomes
            .iter()
            .filter(|o| o.cell == c)
            .filter_map(|o| o.result.as_ref().ok().copied())
            .collect();
        let failures = outcomes.iter().filter(|o| o.cell == c && o.result.is_err()).count();
        let col = |f: &dyn Fn(&RunMetrics) -> Option<f64>| mean_std(&ok.iter().filter_map(f).collect::<Vec<_>>());
        let sp = col(&|m| m.sqrt_pehe);
        let pe = col(&|m| m.pehe);
        let au = col(&|m| Some(m.auuc));
        let fr = col(&|m| Some(m.factual_rmse));
        let mut rec: Vec<String> = cell.fields().to_vec();
        rec.push(cell.config(&grid.base, 0).estimator_name().to_string());
        rec.push(ok.len().to_string());
        rec.push(failures.to_string());
        for (m, s) in [sp, pe, au, fr] {
            rec.push(fmt(m));
            rec.push(fmt(s));
        }
        results.write_record(&rec)?;
    }
    results.flush()?;

    let succeeded = outcomes.iter().filter(|o| o.result.is_ok()).count();
    println!(
        "{} cells x {} seeds: {} runs succeeded, {} failed; results in {}",
        cells.len(),
        seeds.len(),
        succeeded,
        outcomes.len() - succeeded,
        args.out.join(RESULTS_CSV).display()
    );
    if succeeded == 0 {
        let numerical = outcomes.iter().any(|o| matches!(o.result, Err((true, _))));
        let first = outcomes
            .iter()
            .find_map(|o| o.result.as_ref().err().map(|(_, m)| m.clone()))
            .unwrap_or_default();
        let msg = format!("every sweep run failed; first failure: {first}");
        return Err(if numerical { CliError::Numerical(msg) } else { CliError::Input(msg) });
    }
    Ok(())
}
