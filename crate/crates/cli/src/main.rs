use std::path::PathBuf;
use std::process::ExitCode;

use ccqi_cli::config::{ConfigError, OutputFormat};
use ccqi_cli::{parse_config, run, CliError, Command, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ccqi",
    version,
    about = "Predict, simulate and discriminate PoS vs CCQI count tables"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// INI-style run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `[output] format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides `[simulation] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Closed-form count table.
    Predict,
    /// Monte Carlo tallies, prediction and z-scores.
    Simulate,
    /// Screen intensity profile.
    Fringes,
    /// Likelihood-ratio test of observed counts.
    Discriminate,
    /// Minimum number of atoms or photons for a target power.
    Plan,
    /// Coherent superposition versus its superselected mixture.
    SectorsDemo,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Predict => Command::Predict,
            Cmd::Simulate => Command::Simulate,
            Cmd::Fringes => Command::Fringes,
            Cmd::Discriminate => Command::Discriminate,
            Cmd::Plan => Command::Plan,
            Cmd::SectorsDemo => Command::SectorsDemo,
        }
    }
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.sim.seed = seed;
    }
    if let Some(format) = args.format {
        config.output.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.clone());
    }
    Ok(config)
}

fn execute(args: &Args) -> Result<(), CliError> {
    let config = load(args)?;
    let artifact = run(args.command.into(), &config)?;
    match &config.output.path {
        Some(path) => std::fs::write(path, artifact)?,
        None => print!("{artifact}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccqi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
