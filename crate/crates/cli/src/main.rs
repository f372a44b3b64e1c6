use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morphforge::pipeline::{self, Mode, Workspace};
use morphforge::{Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "morphforge",
    version,
    about = "Face-morph generation, enhancement and detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input manifest (default: `<out>/manifest.csv`).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Work directory.
    #[arg(long, global = true, default_value = "morphforge-out")]
    out: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic face set and its manifest.
    Synth,
    /// Assign subjects to train/test/val.
    Split,
    /// Align faces, plan pairs and write simple morphs.
    Morph,
    /// Style-transfer enhancement of the simple morphs.
    Enhance,
    /// Sharpened and histogram-adjusted morph variants.
    Post,
    /// Extract the configured feature scheme per split.
    Features,
    /// Fit the configured detector.
    Train {
        #[arg(long, default_value = "g11")]
        mode: Mode,
    },
    /// Score the test split and write reports.
    Eval {
        #[arg(long, default_value = "g11")]
        mode: Mode,
    },
    /// Morph acceptance rate from a similarity-score CSV.
    Mar,
    /// Every step from synth (or the given manifest) to both evaluations.
    Run,
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p, cli.seed)?,
        None => RunConfig::parse("", std::path::Path::new("."), cli.seed)?,
    };
    let ws = Workspace::new(&cli.out)?;
    ws.write_effective_config(&cfg)?;
    let manifest = cli.manifest.as_deref();
    match cli.command {
        Command::Synth => {
            pipeline::synth(&cfg, &ws)?;
        }
        Command::Split => {
            pipeline::split(&cfg, &ws, manifest)?;
        }
        Command::Morph => {
            pipeline::morph(&cfg, &ws, manifest)?;
        }
        Command::Enhance => {
            pipeline::enhance(&cfg, &ws)?;
        }
        Command::Post => {
            pipeline::post(&cfg, &ws)?;
        }
        Command::Features => {
            pipeline::features(&cfg, &ws)?;
        }
        Command::Train { mode } => {
            let p = pipeline::train(&cfg, &ws, mode)?;
            println!("{}", p.display());
        }
        Command::Eval { mode } => {
            let p = pipeline::eval(&cfg, &ws, mode)?;
            println!("{}", p.default_csv.display());
        }
        Command::Mar => {
            println!("{:.6}", pipeline::mar(&cfg, &ws)?);
        }
        Command::Run => pipeline::run_all(&cfg, &ws, manifest)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
