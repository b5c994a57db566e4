mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

/// Scattering and nonlinear evolution for matrix Schrödinger operators on
/// the half-line.
#[derive(Parser)]
#[command(name = "halfline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Jost table, scattering matrix, classification and bound-state scan.
    Scatter(Args),
    /// Run the nonlinear evolution and export the trajectory.
    Evolve(Args),
    /// Evolve and run the large-time checks.
    Verify(Args),
    /// Line problem: δ scattering, fold/solve/unfold, zero-energy class.
    Line(Args),
    /// Quick closed-form and cross-method checks.
    Selftest(SelftestArgs),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SelftestArgs {
    /// Accepted for symmetry with the other commands; unused.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HALFLINE_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HALFLINE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn load(args: &Args) -> Result<(RunConfig, PathBuf), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Scatter(a) => {
            let (cfg, out) = load(&a)?;
            commands::cmd_scatter(&cfg, &out)
        }
        Command::Evolve(a) => {
            let (cfg, out) = load(&a)?;
            commands::cmd_evolve(&cfg, &out)
        }
        Command::Verify(a) => {
            let (cfg, out) = load(&a)?;
            commands::cmd_verify(&cfg, &out)
        }
        Command::Line(a) => {
            let (cfg, out) = load(&a)?;
            commands::cmd_line(&cfg, &out)
        }
        Command::Selftest(a) => {
            if let Some(out) = &a.out {
                std::fs::create_dir_all(out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
            }
            commands::cmd_selftest(a.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "category": e.category(), "message": e.to_string() }));
            ExitCode::from(e.exit_code())
        }
    }
}
