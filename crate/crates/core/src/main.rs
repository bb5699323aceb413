use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use linkgame::cli::{load_scenario, run_command, CliError, Command, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Simulate,
    Minmax,
    Maxmin,
    SpeCheck,
    Oracle,
    MpCheck,
    Horizon,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Minmax => Command::Minmax,
            Cmd::Maxmin => Command::Maxmin,
            Cmd::SpeCheck => Command::SpeCheck,
            Cmd::Oracle => Command::Oracle,
            Cmd::MpCheck => Command::MpCheck,
            Cmd::Horizon => Command::Horizon,
        }
    }
}

/// Adversarial link-breaking game on consensus networks.
#[derive(Debug, Parser)]
#[command(name = "linkgame", version)]
struct Args {
    command: Cmd,
    /// Scenario file (may also be given with --scenario).
    path: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory receiving report.json and trajectory.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// Enumeration cap for the oracle.
    #[arg(long)]
    cap: Option<u128>,
    /// Re-evaluation period in seconds.
    #[arg(long)]
    rho: Option<f64>,
}

fn run(args: Args) -> Result<String, CliError> {
    let path = args
        .scenario
        .or(args.path)
        .ok_or_else(|| CliError::Io("no scenario given; pass a path or --scenario PATH".into()))?;
    let scenario = load_scenario(&path)?;
    let opts = RunOptions {
        out_dir: args.out,
        seed: args.seed,
        quad_nodes: args.quad_nodes,
        cap: args.cap,
        rho: args.rho,
    };
    run_command(args.command.into(), &scenario, &opts)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
