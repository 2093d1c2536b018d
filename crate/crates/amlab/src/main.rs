use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use amlab::config;
use amlab::run::{execute, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandName {
    Alpha,
    Beta,
    Aubry,
    Mather,
    Flats,
    Singular,
    VerifyTheorem,
    LemmaSuite,
}

impl From<CommandName> for Command {
    fn from(name: CommandName) -> Command {
        match name {
            CommandName::Alpha => Command::Alpha,
            CommandName::Beta => Command::Beta,
            CommandName::Aubry => Command::Aubry,
            CommandName::Mather => Command::Mather,
            CommandName::Flats => Command::Flats,
            CommandName::Singular => Command::Singular,
            CommandName::VerifyTheorem => Command::VerifyTheorem,
            CommandName::LemmaSuite => Command::LemmaSuite,
        }
    }
}

/// Aubry-Mather lab: weak-KAM pipelines over torus Lagrangians.
#[derive(Parser)]
#[command(name = "amlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: CommandName,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir (default "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config overrides, e.g. --set n=64 --set tolerances.tol_a=0.01
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, echo) = match config::load(&cli.config, &cli.set) {
        Ok(pair) => pair,
        Err(err) => {
            eprintln!("amlab: {err}");
            return ExitCode::from(2);
        }
    };
    let out_root = cli
        .out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match execute(cli.command.into(), &cfg, &echo, &out_root) {
        Ok(outcome) => {
            for message in &outcome.messages {
                eprintln!("amlab: {message}");
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("amlab: {err}");
            ExitCode::from(2)
        }
    }
}
