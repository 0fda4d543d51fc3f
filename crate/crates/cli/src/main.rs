use clap::{Parser, Subcommand};
use macroipm::config::{load_config, RunConfig};
use macroipm_cli::{exit_code, run_command, Command, EXIT_OK};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "macroipm", version, about = "Entropy solutions of macroscopic IPM")]
struct Cli {
    #[command(subcommand)]
    command: Subcommands,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key=value` setting applied on top of the file; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Subcommands {
    /// Solve the level-set fixed point and write the eta checkpoint.
    SolveLevelset,
    /// Rebuild density, velocity, flux and level curves from the checkpoint.
    Reconstruct,
    /// Run the finite-volume scheme.
    FvRun,
    /// Run the one-dimensional minimizing-movement scheme.
    JkoFlat,
    /// Evaluate balances and identities on reconstructed fields.
    Diagnose,
    /// Tabulate gaps between level-set and finite-volume densities.
    Compare,
}

impl From<Subcommands> for Command {
    fn from(c: Subcommands) -> Self {
        match c {
            Subcommands::SolveLevelset => Command::SolveLevelset,
            Subcommands::Reconstruct => Command::Reconstruct,
            Subcommands::FvRun => Command::FvRun,
            Subcommands::JkoFlat => Command::JkoFlat,
            Subcommands::Diagnose => Command::Diagnose,
            Subcommands::Compare => Command::Compare,
        }
    }
}

fn load(cli: &Cli) -> macroipm::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => load_config(path, &cli.overrides)?,
        None => RunConfig::from_toml("", &cli.overrides)?,
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = load(&cli).and_then(|config| run_command(cli.command.into(), &config));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
