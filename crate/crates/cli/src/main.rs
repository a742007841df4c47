use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hops_cli::commands;
use hops_cli::config::{CliResult, Config};

#[derive(Parser)]
#[command(name = "hops", version, about = "Stochastic hierarchy solver for open quantum dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration file (key.subkey = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override ensemble.seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Expand the configured bath into exponential terms.
    ExpandBath(CommonArgs),
    /// Run a trajectory ensemble and write density/observable tables.
    Ensemble(CommonArgs),
    /// Compute deterministic absorption spectra.
    Spectrum(CommonArgs),
    /// Run a validation suite: noise, oracle or convergence.
    Validate {
        suite: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_config(args: &CommonArgs) -> CliResult<Config> {
    let mut cfg = Config::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set("ensemble.seed", seed.to_string());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match &cli.command {
        Command::ExpandBath(a) => commands::cmd_expand_bath(&load_config(a)?, &a.out),
        Command::Ensemble(a) => commands::cmd_ensemble(&load_config(a)?, &a.out),
        Command::Spectrum(a) => commands::cmd_spectrum(&load_config(a)?, &a.out),
        Command::Validate { suite, common } => {
            commands::cmd_validate(suite, &load_config(common)?, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
