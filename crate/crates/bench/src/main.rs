use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use csc_bench::plan::ExperimentPlan;
use csc_bench::runner::run_experiment;
use csc_bench::solve::{generate_dictionary, run_solve, DictionaryRequest, SolveRequest, Solver};
use csc_bench::verify::verify_dir;
use csc_bench::BenchError;
use csc_core::bp::ThresholdMode;

#[derive(Parser)]
#[command(name = "csc", version, about = "Convolutional sparse coding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan, write its artifacts and verify them.
    Run {
        plan: PathBuf,
        /// Output directory (defaults to the plan's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a plan key, e.g. `--set trials=20`.
        #[arg(long = "set", value_parser = parse_key_value)]
        overrides: Vec<(String, String)>,
        #[arg(long)]
        no_verify: bool,
    },
    /// Check the artifacts of a finished run.
    Verify { dir: PathBuf },
    /// Write a local dictionary file.
    GenDict {
        /// `experiment`, `dct` or `search`.
        #[arg(long, default_value = "experiment")]
        kind: DictKind,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 640)]
        signal_len: usize,
        #[arg(long, default_value_t = 0.09)]
        target_mu: f64,
        #[arg(long, default_value_t = 640)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        max_steps: usize,
        /// Destination file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one signal against a dictionary.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DictKind {
    Experiment,
    Dct,
    Search,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Omp,
    Ista,
    Admm,
    IstLocal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    L1,
    L0,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    solver: SolverArg,
    /// Fixed penalty, or the schedule's starting value.
    #[arg(long)]
    lambda: Option<f64>,
    /// Decay factor of a geometric penalty schedule.
    #[arg(long = "lambda-schedule")]
    lambda_schedule: Option<f64>,
    #[arg(long = "lambda-floor", default_value_t = 1e-8)]
    lambda_floor: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Tie the ADMM step to the penalty: rho = ratio * lambda.
    #[arg(long = "rho-per-lambda")]
    rho_per_lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "l1")]
    mode: ModeArg,
    /// OMP: number of atoms to select.
    #[arg(long)]
    sparsity: Option<usize>,
    /// OMP: stop once the residual norm drops to this value.
    #[arg(long)]
    residual: Option<f64>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "dict")]
    dictionary: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

enum Outcome {
    Pass,
    Fail,
}

fn run(cli: Cli) -> Result<Outcome, BenchError> {
    match cli.command {
        Command::Run {
            plan,
            out,
            overrides,
            no_verify,
        } => {
            let plan = ExperimentPlan::load_with(&plan, &overrides)?;
            let (output, dir) = run_experiment(&plan, out.as_deref())?;
            println!(
                "wrote {} rows to {} ({} failed trials)",
                output.results.rows.len(),
                dir.display(),
                output.failures()
            );
            if no_verify {
                return Ok(Outcome::Pass);
            }
            report(&dir)
        }
        Command::Verify { dir } => report(&dir),
        Command::GenDict {
            kind,
            n,
            m,
            signal_len,
            target_mu,
            seed,
            max_steps,
            out,
        } => {
            let req = match kind {
                DictKind::Experiment => DictionaryRequest::Experiment,
                DictKind::Dct => DictionaryRequest::Dct { n, m },
                DictKind::Search => DictionaryRequest::LowCoherence {
                    n,
                    m,
                    signal_len,
                    target_mu,
                    seed,
                    max_steps,
                },
            };
            let (_, text) = generate_dictionary(&req)?;
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|source| BenchError::Io { path, source })?,
                None => print!("{text}"),
            }
            Ok(Outcome::Pass)
        }
        Command::Solve(a) => {
            let req = SolveRequest {
                solver: match a.solver {
                    SolverArg::Omp => Solver::Omp,
                    SolverArg::Ista => Solver::Ista,
                    SolverArg::Admm => Solver::Admm,
                    SolverArg::IstLocal => Solver::IstLocal,
                },
                lambda: a.lambda,
                lambda_schedule: a.lambda_schedule,
                lambda_floor: a.lambda_floor,
                rho: a.rho,
                rho_per_lambda: a.rho_per_lambda,
                tol: a.tol,
                max_iterations: a.max_iters,
                mode: match a.mode {
                    ModeArg::L1 => ThresholdMode::L1,
                    ModeArg::L0 => ThresholdMode::L0,
                },
                sparsity: a.sparsity,
                residual: a.residual,
                input: a.input,
                dictionary: a.dictionary,
                output: a.out,
                trace: a.trace,
            };
            let res = run_solve(&req)?;
            eprintln!(
                "iterations={} converged={} support={} wall_time={:.3}s",
                res.iterations,
                res.converged,
                res.support.len(),
                res.wall_time
            );
            Ok(Outcome::Pass)
        }
    }
}

fn report(dir: &std::path::Path) -> Result<Outcome, BenchError> {
    let report = verify_dir(dir)?;
    print!("{}", report.render());
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
