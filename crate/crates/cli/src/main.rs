use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use erdlab::experiment::{self, ExperimentConfig};
use erdlab::Error;

/// Diffusion-training laboratory on a 2D Gaussian mixture.
#[derive(Debug, Parser)]
#[command(name = "erdlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the global model (and bin models with `piecewise = true`).
    Train(RunArgs),
    /// Bayes floors and excess for every target.
    Bayes(RunArgs),
    /// Oracle signal/noise norms per sample.
    Phase(RunArgs),
    /// NTK spectra, effective rank and heatmaps.
    Ntk(RunArgs),
    /// Hidden-feature PCA across diffusion times.
    Pca(RunArgs),
    /// One model per weight rule, compared by excess.
    Compare(RunArgs),
    /// Train everything and run every analysis.
    All(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG views of each report.
    #[arg(long)]
    plot: bool,
    /// Bayes floors only; no checkpoint needed.
    #[arg(long)]
    oracle_only: bool,
}

impl RunArgs {
    fn load(&self) -> erdlab::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_file(&self.config).map_err(|e| match e {
            Error::Io { path, source } => {
                Error::Config(format!("cannot read config {}: {source}", path.display()))
            }
            other => other,
        })?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        cfg.plot |= self.plot;
        cfg.oracle_only |= self.oracle_only;
        Ok(cfg)
    }
}

fn configure_threads() -> erdlab::Result<()> {
    let Ok(raw) = std::env::var("ERDLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("ERDLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> erdlab::Result<PathBuf> {
    configure_threads()?;
    let (args, cmd): (&RunArgs, fn(&ExperimentConfig) -> erdlab::Result<()>) = match &cli.command {
        Command::Train(a) => (a, experiment::cmd_train),
        Command::Bayes(a) => (a, experiment::cmd_bayes),
        Command::Phase(a) => (a, experiment::cmd_phase),
        Command::Ntk(a) => (a, experiment::cmd_ntk),
        Command::Pca(a) => (a, experiment::cmd_pca),
        Command::Compare(a) => (a, experiment::cmd_compare),
        Command::All(a) => (a, experiment::cmd_all),
    };
    let cfg = args.load()?;
    cmd(&cfg)?;
    Ok(cfg.out_dir)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(dir) => {
            eprintln!("erdlab: wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("erdlab: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
