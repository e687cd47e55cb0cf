use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polyflow_cli::commands::{command_check, command_oracle, command_simulate, CommandError, ExitStatus};
use polyflow_cli::RunConfig;

#[derive(Parser)]
#[command(name = "polyflow", version, about = "Dilute polymer flow with a kinetic bead-spring model")]
struct Cli {
    /// Worker threads (overrides the configuration); results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized property checks.
    #[arg(long, global = true, default_value_t = 20_240_601)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the time loop and write the diagnostics CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the invariant suite for a configuration.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named reference computation.
    Oracle { name: String },
    /// Print a shipped preset as a configuration file.
    Preset { name: String },
}

fn threads(cli: Option<usize>, config: Option<&RunConfig>) {
    let n = cli.or_else(|| config.and_then(|c| c.threads));
    if let Some(n) = n {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Simulate { config } => {
            let config = RunConfig::load(&config)?;
            threads(cli.threads, Some(&config));
            command_simulate(&config)
        }
        Command::Check { config } => {
            let config = RunConfig::load(&config)?;
            threads(cli.threads, Some(&config));
            command_check(&config, cli.seed).map(|_| ())
        }
        Command::Oracle { name } => {
            threads(cli.threads, None);
            command_oracle(&name)
        }
        Command::Preset { name } => {
            let config = polyflow_cli::presets::preset(&name)
                .ok_or(polyflow_cli::ConfigError::UnknownPreset(name))?;
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(ExitStatus::Success as u8),
        Err(e) => {
            if let CommandError::Invariant(list) = &e {
                for line in list {
                    eprintln!("{line}");
                }
            }
            eprintln!("error: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}
