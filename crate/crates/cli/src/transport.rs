use std::path::{Path, PathBuf};

use clap::Args;
use escfr_core::geometry::pairwise_sqeuclidean;
use escfr_core::ot::{exact_transport, unbalanced_sinkhorn_plan, Relaxation, SolverConfig};
use ndarray::{Array1, Array2};

use crate::error::{input, CliResult};
use crate::io::create;

#[derive(Debug, Args)]
pub struct OtArgs {
    /// Source points: CSV with a header; a `mass` column is optional, otherwise masses are uniform.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Marginal relaxation strength; `inf` enforces both marginals.
    #[arg(long, default_value = "inf")]
    pub kappa: Relaxation<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Solve the unregularized problem with the transportation simplex instead.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value = "coupling.csv")]
    pub out: PathBuf,
}

pub fn read_points(path: &Path) -> CliResult<(Array2<f64>, Array1<f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr.headers()?.clone();
    let mass_col = header.iter().position(|h| h.trim() == "mass");
    let dims = header.len() - usize::from(mass_col.is_some());
    if dims == 0 {
        return Err(input(format!("{}: no coordinate columns", path.display())));
    }
    let mut coords = Vec::new();
    let mut mass = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                input(format!(
                    "{}: row {}, column `{}`: `{field}` is not a number",
                    path.display(),
                    r + 1,
                    &header[c]
                ))
            })?;
            if Some(c) == mass_col {
                mass.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    let n = coords.len() / dims;
    if n == 0 {
        return Err(input(format!("{}: no points", path.display())));
    }
    let points = Array2::from_shape_vec((n, dims), coords).map_err(|e| input(e.to_string()))?;
    let mass = if mass_col.is_some() {
        Array1::from(mass)
    } else {
        Array1::from_elem(n, 1.0 / n as f64)
    };
    Ok((points, mass))
}

pub fn run(args: &OtArgs) -> CliResult<()> {
    let (xa, a) = read_points(&args.a)?;
    let (xb, b) = read_points(&args.b)?;
    if xa.ncols() != xb.ncols() {
        return Err(input(format!(
            "point dimensions differ: {} vs {}",
            xa.ncols(),
            xb.ncols()
        )));
    }
    let cost = pairwise_sqeuclidean(xa.view(), xb.view())?;
    let plan = if args.exact {
        exact_transport(a.view(), b.view(), &cost)?
    } else {
        let cfg = SolverConfig {
            epsilon: args.epsilon,
            kappa: args.kappa,
            max_iters: args.max_iters,
            tol: args.tol,
        };
        unbalanced_sinkhorn_plan(a.view(), b.view(), &cost, &cfg)?
    };

    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record((0..plan.coupling.ncols()).map(|j| format!("b{j}")))?;
    for row in plan.coupling.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;

    println!("cost {}", plan.cost);
    println!("row_residual {}", plan.row_violation(a.view()));
    println!("col_residual {}", plan.col_violation(b.view()));
    println!("iterations {}", plan.iterations_used);
    println!("converged {}", plan.converged);
    let masses: Vec<String> = plan.row_marginal.iter().map(|v| format!("{v:.6}")).collect();
    println!("row_mass {}", masses.join(","));
    Ok(())
}

