mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Invariant densities and linear response for the LSV intermittent maps.
#[derive(Debug, Parser)]
#[command(name = "pmresp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Induced density h, its derivative, and the unit-interval density rho.
    Density,
    /// Expectation of the observable and its parameter derivative.
    Response,
    /// Responses on an alpha grid.
    Sweep,
    /// Hypothesis and bound audits; exits 3 if any check fails.
    Verify,
    /// Monte Carlo estimate with batch-means error bars.
    Mc,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Response => "response",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "F")]
    alpha: Option<f64>,
    #[arg(long, global = true, value_name = "A:B:STEP")]
    alpha_grid: Option<String>,
    /// Observable, e.g. x, one, cos:1, pow:-0.1, poly:1,0,3.
    #[arg(long, global = true, value_name = "NAME[:params]")]
    obs: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    nodes: Option<usize>,
    #[arg(long, global = true, value_name = "F")]
    tol: Option<f64>,
    #[arg(long, global = true, value_name = "F")]
    series_tol: Option<f64>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// How a run ended, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
    Audit(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Audit(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

impl From<pmresp_core::error::Error> for Failure {
    fn from(e: pmresp_core::error::Error) -> Self {
        Failure::Numerical(e.into())
    }
}

fn setup(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(cli.flags.config.as_deref()).map_err(Failure::Config)?;
    cfg.apply(&cli.flags);
    cfg.validate().map_err(Failure::Config)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.into()))?;
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Config(e.into()))?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PMRESP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = setup(&cli).and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("configuration error: {e:#}"),
                Failure::Numerical(e) => eprintln!("numerical failure: {e:#}"),
                Failure::Audit(n) => eprintln!("audit failed: {n} checks did not pass"),
            }
            ExitCode::from(f.code())
        }
    }
}
