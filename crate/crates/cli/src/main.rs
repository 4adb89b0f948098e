use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ptstab_cli::{
    cmd_check_assumptions, cmd_run, cmd_sweep, cmd_verify_cert, load_config, RunOptions, EXIT_CONFIG, EXIT_RUNTIME,
};

/// Adaptive prescribed-time stabilization experiments.
///
/// Exit codes: 0 all checks pass, 1 a monitor or check failed,
/// 2 the simulation aborted, 3 the config or certificate was rejected.
#[derive(Parser)]
#[command(name = "ptstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one experiment and write trajectory, monitors and metadata.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Simulate every combination of `--set key=v1,v2,...` overrides.
    Sweep {
        config: PathBuf,
        /// Dotted key and comma-separated TOML values, e.g. `sim.d_tau=1e-4,5e-5`.
        #[arg(long = "set", required = true)]
        sets: Vec<String>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Check the certificate inequalities on the configured sample grid.
    VerifyCert { config: PathBuf },
    /// Check the structural assumptions on the configured sample grid.
    CheckAssumptions { config: PathBuf },
}

#[derive(Args)]
struct Opts {
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step in warped time, overriding `[sim] d_tau`.
    #[arg(long)]
    dtau: Option<f64>,
    /// Also write SVG plots of |x|, u, r and theta_hat.
    #[arg(long)]
    plots: bool,
    /// Recorded in the run metadata.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Opts> for RunOptions {
    fn from(o: Opts) -> Self {
        RunOptions {
            out: o.out,
            d_tau: o.dtau,
            plots: o.plots,
            seed: o.seed,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let path = match &cli.command {
        Command::Run { config, .. }
        | Command::Sweep { config, .. }
        | Command::VerifyCert { config }
        | Command::CheckAssumptions { config } => config.clone(),
    };
    let exp = match load_config(&path) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let mut out = io::stdout().lock();
    let result = match cli.command {
        Command::Run { opts, .. } => cmd_run(exp, &opts.into(), &mut out),
        Command::Sweep { sets, opts, .. } => cmd_sweep(exp, &sets, &opts.into(), &mut out),
        Command::VerifyCert { .. } => cmd_verify_cert(&exp, &mut out),
        Command::CheckAssumptions { .. } => cmd_check_assumptions(&exp, &mut out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(EXIT_RUNTIME as u8)
        }
    }
}
