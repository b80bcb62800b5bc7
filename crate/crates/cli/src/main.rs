use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use extem_cli::emit::emitter;
use extem_cli::run::{run_decompose, run_flux, run_report, run_verify, with_threads, RunSummary};
use extem_cli::{CliError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "extem", version, about = "Field checks and angular momentum flux for scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; `report` reads from it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for the mode sums.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replaces the seed from the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification checks and print one line per check.
    Verify,
    /// Frequency-space decomposition, plus real-space comparison when a lattice is configured.
    Decompose,
    /// Real-space flux only.
    Flux,
    /// Print a table from an earlier decompose run.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "json-lines",
        }
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    cli.out.clone().ok_or_else(|| CliError::Config("--out is required".into()))
}

fn print_summary(s: &RunSummary) {
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    for f in &s.files {
        println!("wrote {}", f.display());
    }
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    let emit = emitter(cli.format.name()).expect("every format has an emitter");
    match cli.command {
        Command::Verify => {
            let cfg = load(cli)?;
            let report = with_threads(cli.threads, || run_verify(&cfg))??;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", report.render());
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Decompose => {
            let cfg = load(cli)?;
            let out = out_dir(cli)?;
            print_summary(&with_threads(cli.threads, || run_decompose(&cfg, &out, emit))??);
            Ok(0)
        }
        Command::Flux => {
            let cfg = load(cli)?;
            let out = out_dir(cli)?;
            print_summary(&with_threads(cli.threads, || run_flux(&cfg, &out, emit))??);
            Ok(0)
        }
        Command::Report => {
            let out = out_dir(cli)?;
            print!("{}", run_report(&out, emit)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
