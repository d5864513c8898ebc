use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use escfr_core::geometry::pairwise_sqeuclidean;
use escfr_core::ot::{sinkhorn_plan, unbalanced_sinkhorn_plan, CostMatrix, SolverConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, CliResult};
use crate::io::create;

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512,1024")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
    pub epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
    pub kappas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Problem size held fixed while epsilon or kappa varies.
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    /// Epsilon held fixed while n or kappa varies.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Kappa held fixed while n or epsilon varies.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sinkhorn,
    Unbalanced,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub sweep: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub reps: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub mean_iterations: f64,
}

fn instance(seed: u64, n: usize, rep: usize, dim: usize) -> CostMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32) ^ rep as u64);
    let mut pts = || Array2::from_shape_simple_fn((n, dim), || rng.random::<f64>());
    let (xa, xb) = (pts(), pts());
    pairwise_sqeuclidean(xa.view(), xb.view()).expect("same dimension")
}

fn time_cell(args: &BenchArgs, sweep: &str, alg: Algorithm, n: usize, eps: f64, kappa: f64) -> CliResult<BenchRow> {
    let mass = Array1::from_elem(n, 1.0 / n as f64);
    let cfg = match alg {
        Algorithm::Sinkhorn => SolverConfig::balanced(eps),
        Algorithm::Unbalanced => SolverConfig::unbalanced(eps, kappa),
    }
    .with_max_iters(args.max_iters);
    let mut secs = Vec::with_capacity(args.reps);
    let mut iters = 0usize;
    for rep in 0..args.reps {
        let cost = instance(args.seed, n, rep, args.dim);
        let start = Instant::now();
        let plan = match alg {
            Algorithm::Sinkhorn => sinkhorn_plan(mass.view(), mass.view(), &cost, &cfg)?,
            Algorithm::Unbalanced => unbalanced_sinkhorn_plan(mass.view(), mass.view(), &cost, &cfg)?,
        };
        secs.push(start.elapsed().as_secs_f64());
        iters += plan.iterations_used;
    }
    let r = args.reps as f64;
    let mean = secs.iter().sum::<f64>() / r;
    let std = if args.reps > 1 {
        (secs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BenchRow {
        sweep: sweep.into(),
        algorithm: alg,
        n,
        epsilon: eps,
        kappa: if alg == Algorithm::Sinkhorn { f64::INFINITY } else { kappa },
        reps: args.reps,
        mean_seconds: mean,
        std_seconds: std,
        mean_iterations: iters as f64 / r,
    })
}

/// Rows for the n, epsilon and kappa sweeps, in that order.
pub fn bench_rows(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if args.reps == 0 {
        return Err(input("--reps must be positive"));
    }
    if let Some(n) = args.sizes.iter().chain([&args.n]).find(|&&n| n < 2) {
        return Err(input(format!("sizes must be at least 2, got {n}")));
    }
    if args.dim == 0 {
        return Err(input("--dim must be positive"));
    }
    let mut rows = Vec::new();
    for alg in [Algorithm::Sinkhorn, Algorithm::Unbalanced] {
        for &n in &args.sizes {
            rows.push(time_cell(args, "n", alg, n, args.epsilon, args.kappa)?);
        }
    }
    for alg in [Algorithm::Sinkhorn, Algorithm::Unbalanced] {
        for &eps in &args.epsilons {
            rows.push(time_cell(args, "epsilon", alg, args.n, eps, args.kappa)?);
        }
    }
    for &kappa in &args.kappas {
        rows.push(time_cell(args, "kappa", Algorithm::Unbalanced, args.n, args.epsilon, kappa)?);
    }
    Ok(rows)
}

/// True when consecutive means move in the stated direction, up to a relative band.
pub fn follows_trend(means: &[f64], increasing: bool, band: f64) -> bool {
    means.windows(2).all(|w| {
        if increasing {
            w[1] >= w[0] * (1.0 - band)
        } else {
            w[1] <= w[0] * (1.0 + band)
        }
    })
}

pub fn trend_summary(rows: &[BenchRow]) -> Vec<(String, bool)> {
    let means = |sweep: &str, alg: Algorithm| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.sweep == sweep && r.algorithm == alg)
            .map(|r| r.mean_seconds)
            .collect()
    };
    vec![
        ("sinkhorn time nondecreasing in n".into(), follows_trend(&means("n", Algorithm::Sinkhorn), true, 0.1)),
        ("unbalanced time nondecreasing in n".into(), follows_trend(&means("n", Algorithm::Unbalanced), true, 0.1)),
        ("sinkhorn time decreasing in epsilon".into(), follows_trend(&means("epsilon", Algorithm::Sinkhorn), false, 0.1)),
        ("unbalanced time increasing in kappa".into(), follows_trend(&means("kappa", Algorithm::Unbalanced), true, 0.1)),
    ]
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let rows = bench_rows(args)?;
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    for r in &rows {
        println!(
            "{:<8} {:<10} n={:<5} eps={:<6} kappa={:<6} {:.6}+{:.6}s  iters {:.1}",
            r.sweep, format!("{:?}", r.algorithm).to_lowercase(), r.n, r.epsilon, r.kappa, r.mean_seconds, r.std_seconds, r.mean_iterations
        );
    }
    for (name, ok) in trend_summary(&rows) {
        println!("trend {}: {}", if ok { "holds" } else { "violated" }, name);
    }
    Ok(())
}
