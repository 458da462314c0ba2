use std::path::PathBuf;
use std::process::ExitCode;

use chainsim_cli::{execute, parse_config, CliError, Mode};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainsim", version, about = "Boson-sampling chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// TOML run configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to CHAINSIM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble, or an error-insertion experiment when errors are configured.
    Run,
    /// Density-matrix oracle ensemble.
    Oracle,
    /// Compare two distribution files.
    Stats { reference: Option<String>, candidate: Option<String> },
    /// Cost and correlation-length estimates.
    Estimate,
    /// Print generated protocol instances.
    Instance,
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", serde_json::to_string_pretty(&e.to_json()).expect("json"));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(source) => return fail(CliError::Io { path: p.clone(), source }),
        },
        None => String::new(),
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(e.into()),
    };
    match cli.command {
        Some(Command::Run) => config.mode = Mode::Run,
        Some(Command::Oracle) => config.mode = Mode::Oracle,
        Some(Command::Estimate) => config.mode = Mode::Estimate,
        Some(Command::Instance) => config.mode = Mode::Instance,
        Some(Command::Stats { reference, candidate }) => {
            config.mode = Mode::Stats;
            if let Some(r) = reference {
                config.stats.reference = r;
            }
            if let Some(c) = candidate {
                config.stats.candidate = c;
            }
        }
        None => {}
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.out = o.to_string_lossy().into_owned();
    }
    let env_threads = std::env::var("CHAINSIM_THREADS").ok().and_then(|v| v.parse().ok());
    if let Some(t) = cli.threads.or(env_threads) {
        config.threads = t;
    }
    match execute(&config) {
        Ok(report) => {
            print!("{}", report.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
