//! `escfr` command-line front end: dataset generation, training, evaluation,
//! sweeps, transport inspection and solver timing.

pub mod bench;
pub mod error;
pub mod eval;
pub mod generate;
pub mod io;
pub mod sweep;
pub mod train;
pub mod transport;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "escfr", version, about = "Optimal-transport counterfactual regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic observational dataset.
    Generate(generate::GenerateArgs),
    /// Split, train, and write manifest, report, checkpoint and metrics.
    Train(train::TrainArgs),
    /// Score a checkpoint or a baseline estimator on one split.
    Eval(eval::EvalArgs),
    /// Run a hyperparameter grid over seeds and aggregate.
    Sweep(sweep::SweepArgs),
    /// Solve one transport problem between two point sets.
    Ot(transport::OtArgs),
    /// Time both entropic solvers across sizes, epsilons and kappas.
    Bench(bench::BenchArgs),
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Ot(a) => transport::run(a),
        Command::Bench(a) => bench::run(a),
    }
}

/// Parse and run; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
