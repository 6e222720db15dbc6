//! `roughbel` - simulation and sensitivity toolkit for SDEs driven by rough
//! fractional noise.
//!
//! Subcommands: `kernel-table`, `sample-paths`, `solve`, `simulate-model`,
//! `greeks`, `stability`, `validate`. Exit codes: 0 success, 1 configuration
//! error, 2 numerical failure, 3 validation-suite failure.

mod config;
mod output;
mod runners;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, config files, or parameter combinations (exit 1).
    Config(String),
    /// Numerical failure during computation (exit 2).
    Numerical(String),
    /// A validation or acceptance suite reported failures (exit 3).
    Suite(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Suite(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Suite(m) => m,
        }
    }
}

/// Parameter-validation errors are configuration mistakes; factorisation or
/// non-finite failures are numerical.
pub fn lib_err(e: roughbel::Error) -> CliError {
    use roughbel::Error as E;
    match e {
        E::NotPositiveDefinite | E::NonFinite(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "roughbel",
    version,
    about = "Rough fractional noise SDE simulation and Malliavin-weight Greeks"
)]
struct Cli {
    /// Worker threads for path loops (0 = library default). Outputs are
    /// identical for every thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Flat key=value config file; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the kernel K_H, its time derivative, and the covariance R_H.
    KernelTable(KernelTableArgs),
    /// Sample one or more joint noise bundles (B, B^H, W, mixed).
    SamplePaths(SamplePathsArgs),
    /// Solve the drifted SDE pathwise and report the first variation.
    Solve(SolveArgs),
    /// Simulate the stock model and its pathwise sensitivities.
    SimulateModel(ModelArgs),
    /// Estimate delta/vega by weight and finite-difference estimators.
    Greeks(GreeksArgs),
    /// Moment-scaling scan of flow stability in the initial condition.
    Stability(StabilityArgs),
    /// Run a named invariant suite; exit 0 on pass, 3 on failure.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct KernelTableArgs {
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid nodes per axis.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SamplePathsArgs {
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    /// none | correlated:RHO | scaled:RHO1,RHO2
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    /// zero | linear:LAMBDA | bump:CENTER,WIDTH,HEIGHT | regime:A1,A2,B1,B2,R
    #[arg(long)]
    drift: Option<String>,
    /// Mollification level applied to the drift (omit for the raw field).
    #[arg(long)]
    mollify: Option<u32>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ModelArgs {
    /// bs | gjr | regime
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Constant volatility of the bs preset.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Mean reversion of the gjr preset.
    #[arg(long)]
    a: Option<f64>,
    /// Long-run level of the gjr preset.
    #[arg(long)]
    b_level: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Truncation level of the exponential volatility map.
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    mollify: Option<u32>,
    #[arg(long)]
    x1: Option<f64>,
    #[arg(long)]
    x2: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GreeksArgs {
    /// sde | stock
    #[arg(long)]
    model: Option<String>,
    /// bel | fd | both
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// call:K | put:K | digital:K | identity | square
    #[arg(long)]
    payoff: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    /// Initial condition of the plain SDE.
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    x1: Option<f64>,
    #[arg(long)]
    x2: Option<f64>,
    /// Drift of the plain SDE (see `solve --drift`).
    #[arg(long)]
    drift: Option<String>,
    #[arg(long)]
    mollify: Option<u32>,
    /// Model preset for --model stock (bs | gjr | regime).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b_level: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// Finite-difference bump (defaults to 1e-2 * scale).
    #[arg(long)]
    fd_bump: Option<f64>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct StabilityArgs {
    /// Moment order, a power of two.
    #[arg(long)]
    p: Option<u32>,
    /// Comma-separated strictly decreasing gaps, e.g. 0.1,0.01,0.001
    #[arg(long)]
    gaps: Option<String>,
    #[arg(long)]
    drift: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    base_x: Option<f64>,
    /// Cube lo,hi containing all pairs.
    #[arg(long)]
    cube: Option<String>,
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// kernel | noise | sde | model | greeks | stability | all
    #[arg(long)]
    suite: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }

    let file_cfg = match &cli.config {
        None => config::ConfigMap::default(),
        Some(p) => match config::ConfigMap::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}", e.message());
                return ExitCode::from(e.exit_code());
            }
        },
    };

    let result = match cli.command {
        Command::KernelTable(a) => runners::kernel_table(&a, &file_cfg),
        Command::SamplePaths(a) => runners::sample_paths(&a, &file_cfg),
        Command::Solve(a) => runners::solve(&a, &file_cfg),
        Command::SimulateModel(a) => runners::simulate_model(&a, &file_cfg),
        Command::Greeks(a) => runners::greeks(&a, &file_cfg),
        Command::Stability(a) => runners::stability(&a, &file_cfg),
        Command::Validate(a) => validate::run(&a, &file_cfg),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
