//! `switchcert` command-line front end.
//!
//! Exit codes: 0 success, 1 infeasible certificate or failed check,
//! 2 unreadable or invalid input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "switchcert",
    version,
    about = "Stability certificates and simulation for switched systems"
)]
struct Cli {
    /// Worker threads for batch commands (defaults to all cores).
    #[arg(long, env = "SWITCHCERT_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Project file (JSON, schema switchcert/v1).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the frequency-budget certificate.
    Check {
        #[command(flatten)]
        config: ConfigArg,
        /// Directory for certificate.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a feasible budget above the given floors.
    FindRho {
        #[command(flatten)]
        config: ConfigArg,
        /// Budget JSON with lower bounds; all floors are zero when omitted.
        #[arg(long)]
        floors: Option<PathBuf>,
        /// Directory for config.json with the found budget.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate class members and their membership reports.
    Gen {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of signals.
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate trajectories and check them against the envelope.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Directory of signal CSVs written by `gen`; signals are generated
        /// when omitted.
        #[arg(long)]
        signals: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Initial states per signal (overrides the config).
        #[arg(long)]
        n: Option<usize>,
        /// Overrides the simulation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the bundled configurations against their reference values and
    /// run a reduced simulation.
    #[command(alias = "reproduce-paper")]
    Reproduce {
        /// Directory for reproduce.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Check { config, out } => commands::check(&config.config, out.as_deref()),
        Command::FindRho { config, floors, out } => {
            commands::find_rho(&config.config, floors.as_deref(), out.as_deref())
        }
        Command::Gen { config, n, out, seed } => commands::gen(&config.config, n, &out, seed),
        Command::Simulate {
            config,
            signals,
            out,
            n,
            seed,
        } => commands::simulate(&config.config, signals.as_deref(), &out, n, seed),
        Command::Reproduce { out, seed } => commands::reproduce(out.as_deref(), seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
