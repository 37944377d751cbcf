mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ApplyArgs, DumpFamilyArgs, ScanArgs};
use config::{GlobalArgs, Resolved};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fraclr::Error),
}

/// Verification harness and operator front end for fractional Leibniz rules
/// on periodic grids.
#[derive(Debug, Parser)]
#[command(name = "fraclr", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a sweep plan; exit 0 on PASS, 1 on FAIL.
    Verify {
        /// Plan JSON; overrides the config's `plan` key.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Apply one operator to dumped fields and dump the result.
    Apply(ApplyArgs),
    /// Homogeneity and cone-bound scan of the shifted Riesz symbols.
    ScanSymbols(ScanArgs),
    /// Dump the band multipliers, and optionally a generated test pair.
    DumpFamily(DumpFamilyArgs),
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let plan_flag = match &cli.command {
        Command::Verify { plan } => plan.as_deref(),
        _ => None,
    };
    let cfg = Resolved::new(&cli.global, plan_flag)?;
    if let Some(n) = cfg.threads {
        // the pool is process-global and only set here, so this cannot race
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    match &cli.command {
        Command::Verify { .. } => commands::verify(&cfg),
        Command::Apply(args) => commands::apply(&cfg, args),
        Command::ScanSymbols(args) => commands::scan_symbols(&cfg, args),
        Command::DumpFamily(args) => commands::dump_family(&cfg, args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
