use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rauzy_spectra_cli::config::SEED_ENV;
use rauzy_spectra_cli::{emit_report, run_experiment, run_stages, CliError, ExperimentConfig, RunRecord, Stage};

#[derive(Parser)]
#[command(name = "rauzy-spectra", version, about = "Renormalization experiments for translation flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the interval exchange.
    Iet(Common),
    /// Induction path, Rauzy class and canonical cut points.
    Rauzy {
        #[command(flatten)]
        common: Common,
        /// Exact rational arithmetic.
        #[arg(long)]
        exact: bool,
    },
    /// Lyapunov spectra of the induction cocycle.
    Lyapunov(Common),
    /// Twisted-integral scans against the Diophantine bounds.
    Twisted(Common),
    /// Erdős–Kahane prediction trace and covering count.
    Ek(Common),
    /// Hölder exponent fits and local spectral bounds.
    SpectralScan(Common),
    /// Nearest-integer errors of `αλⁿ`.
    Salem(Common),
    /// Summarize an output directory.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured pipeline.
    Run(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let seed = std::env::var(SEED_ENV).ok();
    let cfg = ExperimentConfig::load(&common.config, seed.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    Ok((cfg, out))
}

fn stages(common: &Common, list: &[Stage]) -> Result<RunRecord, CliError> {
    let (cfg, out) = load(common)?;
    run_stages(&cfg, &out, list)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let record = match cli.command {
        Command::Iet(c) => stages(&c, &[Stage::Iet])?,
        Command::Rauzy { common, exact } => {
            let (mut cfg, out) = load(&common)?;
            cfg.exact |= exact;
            run_stages(&cfg, &out, &[Stage::Rauzy])?
        }
        Command::Lyapunov(c) => stages(&c, &[Stage::Lyapunov, Stage::Cocycle])?,
        Command::Twisted(c) => stages(&c, &[Stage::Twisted])?,
        Command::Ek(c) => stages(&c, &[Stage::Ek])?,
        Command::SpectralScan(c) => stages(&c, &[Stage::Spectral])?,
        Command::Salem(c) => stages(&c, &[Stage::Salem])?,
        Command::Run(c) => {
            let (cfg, out) = load(&c)?;
            run_experiment(&cfg, &out)?
        }
        Command::Report { config, out } => {
            let dir = match (out, config) {
                (Some(o), _) => o,
                (None, Some(c)) => PathBuf::from(ExperimentConfig::load(&c, None)?.output_dir),
                (None, None) => return Err(CliError::Config("report needs --out or --config".into())),
            };
            let record = RunRecord::load(&dir)?;
            print!("{}", emit_report(&dir, &record)?);
            return Ok(());
        }
    };
    for (stage, secs) in &record.timings {
        eprintln!("{stage:>14}  {secs:8.2}s");
    }
    println!("{} files written, config {}", record.files.len(), record.config_hash);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
