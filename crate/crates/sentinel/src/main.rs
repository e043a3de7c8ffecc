//! Thin command-line front end over the library.
//!
//! Every subcommand reads JSON files, calls one library entry point, and
//! prints JSON (or CSV, for `experiment`) to stdout. Exit codes separate
//! the failure classes: 1 for bad input, 2 for a solver that could not
//! converge, 3 for a `verify` run that found a violated inequality.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sentinel::adversary::{corrupt, CorruptionSpec};
use sentinel::harness::{experiment_csv, run_verify, ExperimentConfig, VerifySuite};
use sentinel::io::{chain_to_json, dist_to_json, read_chain, read_dist};
use sentinel::pagerank::{pagerank_stationary, PageRankConfig, Solver};
use sentinel::recovery::{recover, Refine};
use sentinel::spectral::spectral_gap;
use sentinel::{Dist, MarkovChain, Result, StationaryMethod};

const ITERATION_CAP: usize = 1_000_000;
const DENSE_LIMIT: usize = 2048;

#[derive(Parser)]
#[command(
    name = "sentinel",
    about = "Stationary distributions of corrupted Markov chains, with certificates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the stationary distribution of a chain file.
    Stationary(StationaryArgs),
    /// Compute the spectral gap of a chain file.
    Gap(GapArgs),
    /// Compute the regularized fixed point for a restart distribution.
    Pagerank(PagerankArgs),
    /// Apply a seeded corruption and report the damage.
    Corrupt(CorruptArgs),
    /// Recover the stationary distribution of the chain a corrupted file
    /// was derived from, with a certified error bound.
    Recover(RecoverArgs),
    /// Run one randomized inequality suite against a chain file.
    Verify(VerifyArgs),
    /// Run an experiment sweep from a JSON config and emit CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct StationaryArgs {
    /// Chain JSON file.
    chain: PathBuf,
    /// Solver; picked by size when absent.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap for the power method.
    #[arg(long, default_value_t = ITERATION_CAP)]
    max_iter: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Power,
    Direct,
}

#[derive(Args)]
struct GapArgs {
    /// Chain JSON file.
    chain: PathBuf,
    /// Stationary distribution file; computed from the chain when absent.
    #[arg(long)]
    pi: Option<PathBuf>,
}

#[derive(Args)]
struct PagerankArgs {
    /// Chain JSON file.
    chain: PathBuf,
    /// Restart distribution file.
    #[arg(long)]
    mu: PathBuf,
    /// Restart weight in [0, 1].
    #[arg(long)]
    delta: f64,
    /// Solver; picked by size and weight when absent.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Target l1 accuracy.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Resolvent,
    Series,
    Power,
}

#[derive(Args)]
struct CorruptArgs {
    /// Chain JSON file.
    chain: PathBuf,
    /// Corruption spec JSON file: kind, budget, optional target_rows, seed.
    #[arg(long)]
    spec: PathBuf,
    /// Stationary distribution used for budget weighting; computed from
    /// the chain when absent.
    #[arg(long)]
    pi: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    /// Corrupted chain JSON file.
    chain: PathBuf,
    /// Restart distribution file.
    #[arg(long)]
    mu: PathBuf,
    /// Asserted spectral gap of the uncorrupted chain, in (0, 1].
    #[arg(long)]
    gamma: f64,
    /// Asserted corruption level, in [0, 1).
    #[arg(long)]
    eps: f64,
    /// Asserted restart smoothness, at least 1.
    #[arg(long)]
    beta: f64,
    /// Smoothness exponent: a number above 1, or "inf".
    #[arg(long, value_parser = parse_exponent)]
    p: f64,
    /// Compare this many log-spaced restart weights around the tuned one;
    /// absent uses the tuned weight directly.
    #[arg(long)]
    refine: Option<usize>,
    /// Asserted bound on the sup restart density; defaults match the
    /// library.
    #[arg(long)]
    sup_ratio: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Chain JSON file.
    chain: PathBuf,
    /// Which inequality suite to run.
    #[arg(long, value_parser = clap::builder::ValueParser::new(parse_suite))]
    suite: VerifySuite,
    /// Root seed for the suite's random inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent repetitions.
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON file.
    config: PathBuf,
}

fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("{e}")),
    }
}

fn parse_suite(s: &str) -> std::result::Result<VerifySuite, String> {
    s.parse::<VerifySuite>().map_err(|e| format!("{e}"))
}

fn load_pi(chain: &MarkovChain, path: &Option<PathBuf>) -> Result<Dist> {
    match path {
        Some(p) => read_dist(p),
        None => chain.stationary_auto(),
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Stationary(args) => {
            let chain = read_chain(&args.chain)?;
            let pi = match args.method {
                None => chain.stationary_auto()?,
                Some(MethodArg::Power) => {
                    chain.stationary(StationaryMethod::Power, args.tol, args.max_iter)?
                }
                Some(MethodArg::Direct) => {
                    chain.stationary(StationaryMethod::Direct, args.tol, args.max_iter)?
                }
            };
            println!("{}", dist_to_json(&pi)?);
        }
        Command::Gap(args) => {
            let chain = read_chain(&args.chain)?;
            let pi = load_pi(&chain, &args.pi)?;
            let gap = spectral_gap(&chain, &pi)?;
            println!("{}", serde_json::to_string(&gap)?);
        }
        Command::Pagerank(args) => {
            let chain = read_chain(&args.chain)?;
            let mu = read_dist(&args.mu)?;
            let solver = match args.solver {
                Some(SolverArg::Resolvent) => Solver::Resolvent,
                Some(SolverArg::Series) => Solver::Series,
                Some(SolverArg::Power) => Solver::Power,
                // Same policy as the library's internal bound evaluations:
                // direct solve when dense-sized and not too stiff.
                None if chain.n() <= DENSE_LIMIT && args.delta >= 1e-6 => Solver::Resolvent,
                None => Solver::Power,
            };
            let config = PageRankConfig {
                restart: mu,
                delta: args.delta,
                solver,
                tol: args.tol,
                max_terms: ITERATION_CAP,
            };
            let result = pagerank_stationary(&chain, &config)?;
            println!("{}", serde_json::to_string(&result)?);
        }
        Command::Corrupt(args) => {
            let chain = read_chain(&args.chain)?;
            let pi = load_pi(&chain, &args.pi)?;
            let spec: CorruptionSpec = serde_json::from_str(&std::fs::read_to_string(&args.spec)?)?;
            let (corrupted, report) = corrupt(&chain, &pi, &spec)?;
            let chain_value: serde_json::Value = serde_json::from_str(&chain_to_json(&corrupted)?)?;
            let out = serde_json::json!({ "chain": chain_value, "report": report });
            println!("{}", serde_json::to_string(&out)?);
        }
        Command::Recover(args) => {
            let chain = read_chain(&args.chain)?;
            let mu = read_dist(&args.mu)?;
            let refine = match args.refine {
                None | Some(0) => Refine::None,
                Some(k) => Refine::Grid(k),
            };
            let result = recover(
                &chain,
                &mu,
                args.gamma,
                args.eps,
                args.beta,
                args.p,
                args.sup_ratio,
                refine,
            )?;
            println!("{}", serde_json::to_string(&result)?);
        }
        Command::Verify(args) => {
            let chain = read_chain(&args.chain)?;
            let report = run_verify(&chain, args.suite, args.seed, args.trials)?;
            println!("{}", serde_json::to_string(&report)?);
            if report.violations > 0 {
                eprintln!(
                    "verify: {} of {} checks violated",
                    report.violations,
                    report.rows.len()
                );
                return Ok(ExitCode::from(3));
            }
        }
        Command::Experiment(args) => {
            let config: ExperimentConfig =
                serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
            let csv = experiment_csv(&config)?;
            match &config.output {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
