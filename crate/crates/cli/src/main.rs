use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fdl_cli::Command;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    Zkb,
    VerifyNorm,
    Exhaust,
    Estimates,
    BlowupScan,
}

/// Doubly nonlinear Finsler diffusion experiments.
#[derive(Parser)]
#[command(name = "fdl", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// Configuration file.
    config: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = fdl_cli::configure_threads(std::env::var("FDL_THREADS").ok().as_deref()) {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    let cmd = match args.command {
        Sub::Solve => Command::Solve,
        Sub::Zkb => Command::Zkb,
        Sub::VerifyNorm => Command::VerifyNorm,
        Sub::Exhaust => Command::Exhaust,
        Sub::Estimates => Command::Estimates,
        Sub::BlowupScan => Command::BlowupScan,
    };
    let (code, out, err) = fdl_cli::run_file(cmd, &args.config);
    print!("{out}");
    eprint!("{err}");
    ExitCode::from(code as u8)
}
